import * as fs from 'node:fs'
import * as os from 'node:os'
import * as path from 'node:path'
import { spawnSync } from 'node:child_process'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'
import { extractDirectory, idsPath, metadataPath } from '../src/extract.js'
import { readNpy } from '../src/npy.js'
import { formatReport, verifyFile } from '../src/verify.js'
import { writeFixtureDir, type FixtureDir } from './fixtures.js'

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'extract-test-'))
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }))

const pythonHasMetricsLibrary =
  spawnSync('python3', ['-c', 'import rarity_metrics'], { encoding: 'utf8' }).status === 0

let fixture: FixtureDir
let outPath: string

beforeAll(async () => {
  fixture = writeFixtureDir(path.join(tmp, 'images'))
  outPath = path.join(tmp, 'feats.npy')
  await extractDirectory({
    imagesDir: fixture.dir,
    outPath,
    spec: { backbone: 'projection-v1', batchSize: 7, device: 'cpu' },
  })
})

function rowOf(id: string): Float32Array {
  let ids = fs.readFileSync(idsPath(outPath), 'utf8').split('\n').filter((s) => s.length)
  let { shape, data } = readNpy(outPath)
  let i = ids.indexOf(id)
  expect(i).toBeGreaterThanOrEqual(0)
  return data.slice(i * shape[1], (i + 1) * shape[1])
}

describe('extract on the 20-image fixture', () => {
  it('produces a matrix with one row per image in filename order', () => {
    let { shape } = readNpy(outPath)
    expect(shape).toEqual([20, 512])
    let ids = fs.readFileSync(idsPath(outPath), 'utf8').split('\n').filter((s) => s.length)
    expect(ids).toEqual(fixture.files)
  })

  it('records backbone, weights id, preprocessing and dim in metadata', () => {
    let meta = JSON.parse(fs.readFileSync(metadataPath(outPath), 'utf8'))
    expect(meta.backbone).toBe('projection-v1')
    expect(meta.weights_id).toContain('projection-v1')
    expect(meta.preprocessing).toContain('resize')
    expect(meta.dim).toBe(512)
    expect(meta.count).toBe(20)
  })

  it('verify reports all PASS', () => {
    let report = verifyFile(outPath)
    expect(formatReport(report)).not.toContain('FAIL')
    expect(report.ok).toBe(true)
  })

  it('duplicate images produce near-identical rows', () => {
    let [a, b] = fixture.duplicatePair
    let ra = rowOf(a)
    let rb = rowOf(b)
    let dup = Math.hypot(...ra.map((v, i) => v - rb[i]))
    // mean pairwise distance over all rows as the scale reference
    let { shape, data } = readNpy(outPath)
    let [n, d] = shape
    let total = 0
    let pairs = 0
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let acc = 0
        for (let c = 0; c < d; c++) {
          let diff = data[i * d + c] - data[j * d + c]
          acc += diff * diff
        }
        total += Math.sqrt(acc)
        pairs++
      }
    }
    expect(dup).toBeLessThan(1e-3 * (total / pairs))
  })

  it('is deterministic across runs', async () => {
    let second = path.join(tmp, 'again.npy')
    await extractDirectory({
      imagesDir: fixture.dir,
      outPath: second,
      spec: { backbone: 'projection-v1', batchSize: 3, device: 'cpu' },
    })
    expect(fs.readFileSync(second).equals(fs.readFileSync(outPath))).toBe(true)
    expect(fs.readFileSync(idsPath(second), 'utf8')).toBe(fs.readFileSync(idsPath(outPath), 'utf8'))
  })

  it.skipIf(!pythonHasMetricsLibrary)('loads in the metrics library without conversion', () => {
    let py = spawnSync('python3', ['-c', [
      'from rarity_metrics.feature_store import load_features',
      `fs = load_features(${JSON.stringify(outPath)})`,
      'print(fs.n, fs.dim, fs.ids[0], fs.ids[-1])',
    ].join('\n')], { encoding: 'utf8' })
    expect(py.status, py.stderr).toBe(0)
    expect(py.stdout.trim()).toBe(`20 512 ${fixture.files[0]} ${fixture.files[19]}`)
  })

  it.skipIf(!pythonHasMetricsLibrary)('feeds the metrics pipeline end to end', () => {
    // embeddings from the extractor drive a real scoring run
    let py = spawnSync('python3', ['-c', [
      'from rarity_metrics.feature_store import load_features',
      'from rarity_metrics.knn_engine import knn_radii',
      'from rarity_metrics.metrics import rarity',
      `feats = load_features(${JSON.stringify(outPath)})`,
      'report = rarity(knn_radii(feats, 3), feats)',
      'print(report.n_oom, report.n_scored)',
    ].join('\n')], { encoding: 'utf8' })
    expect(py.status, py.stderr).toBe(0)
    expect(py.stdout.trim()).toBe('0 20')
  })
})

describe('decode failure handling', () => {
  it('skips undecodable files with a warning and excludes them from ids', async () => {
    let dir = path.join(tmp, 'with-junk')
    writeFixtureDir(dir)
    fs.writeFileSync(path.join(dir, 'broken.png'), Buffer.from('garbage'))
    let warnings: string[] = []
    let out = path.join(tmp, 'withjunk.npy')
    let result = await extractDirectory({
      imagesDir: dir,
      outPath: out,
      spec: { backbone: 'projection-v1', batchSize: 16, device: 'cpu' },
      log: (line) => warnings.push(line),
    })
    expect(result.count).toBe(20)
    expect(result.skipped).toEqual(['broken.png'])
    expect(warnings.join('\n')).toContain('broken.png')
    let ids = fs.readFileSync(idsPath(out), 'utf8')
    expect(ids).not.toContain('broken.png')
  })

  it('strict mode turns undecodable files into errors', async () => {
    let dir = path.join(tmp, 'strict')
    writeFixtureDir(dir)
    fs.writeFileSync(path.join(dir, 'broken.png'), Buffer.from('garbage'))
    await expect(
      extractDirectory({
        imagesDir: dir,
        outPath: path.join(tmp, 'strict.npy'),
        spec: { backbone: 'projection-v1', batchSize: 16, device: 'cpu' },
        strict: true,
      }),
    ).rejects.toThrow(/cannot decode/)
  })

  it('errors when the directory has no images', async () => {
    let dir = path.join(tmp, 'empty')
    fs.mkdirSync(dir, { recursive: true })
    await expect(
      extractDirectory({
        imagesDir: dir,
        outPath: path.join(tmp, 'none.npy'),
        spec: { backbone: 'projection-v1', batchSize: 16, device: 'cpu' },
      }),
    ).rejects.toThrow(/no image files/)
  })
})
