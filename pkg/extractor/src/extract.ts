import * as fs from 'node:fs'
import { Backbone, ExtractorSpec, createBackbone } from './backbones.js'
import { DecodedImage, decodeImageFile, listImageFiles, resizeBilinear } from './image.js'
import { writeNpy } from './npy.js'

/**
 * Image directory -> NPY embedding matrix plus sidecars.
 *
 * Row order is the lexicographic order of relative file paths, which also
 * become the sample ids (written to `<out>.ids`, one per line).  A metadata
 * JSON at `<out>.meta.json` records the backbone, its weights identifier,
 * the preprocessing description and the embedding width so a run can be
 * reproduced.  Undecodable files are skipped with a warning and excluded
 * from the ids unless `strict` turns them into errors.
 */

export interface ExtractOptions {
  imagesDir: string
  outPath: string
  spec: ExtractorSpec
  strict?: boolean
  log?: (line: string) => void
}

export interface ExtractResult {
  count: number
  dim: number
  skipped: string[]
  outPath: string
}

export function metadataPath(outPath: string): string {
  return outPath + '.meta.json'
}

export function idsPath(outPath: string): string {
  return outPath + '.ids'
}

export async function extractDirectory(opts: ExtractOptions): Promise<ExtractResult> {
  let log = opts.log ?? ((line) => process.stderr.write(line + '\n'))
  let files = listImageFiles(opts.imagesDir)
  if (files.length === 0) {
    throw new Error(`no image files under ${opts.imagesDir}`)
  }
  let backbone = await createBackbone(opts.spec)
  let ids: string[] = []
  let skipped: string[] = []
  let rows: Float32Array[] = []
  let pending: { id: string; pixels: Float32Array }[] = []
  let flush = async () => {
    if (pending.length === 0) return
    let batch = await backbone.embedBatch(pending.map((p) => p.pixels))
    batch.forEach((row) => rows.push(row))
    pending.forEach((p) => ids.push(p.id))
    pending = []
  }
  for (let rel of files) {
    let decoded: DecodedImage
    try {
      decoded = decodeImageFile(`${opts.imagesDir}/${rel}`)
    } catch (e) {
      if (opts.strict) throw e
      skipped.push(rel)
      log(`warning: skipping undecodable image ${rel}: ${(e as Error).message}`)
      continue
    }
    pending.push({ id: rel, pixels: resizeBilinear(decoded, backbone.imageSize) })
    if (pending.length >= opts.spec.batchSize) await flush()
  }
  await flush()
  if (rows.length === 0) {
    throw new Error(`no decodable images under ${opts.imagesDir}`)
  }
  let matrix = new Float32Array(rows.length * backbone.dim)
  rows.forEach((row, i) => matrix.set(row, i * backbone.dim))
  writeNpy(opts.outPath, matrix, [rows.length, backbone.dim])
  fs.writeFileSync(idsPath(opts.outPath), ids.map((id) => id + '\n').join(''), 'utf8')
  let metadata = {
    backbone: backbone.name,
    weights_id: backbone.weightsId,
    preprocessing: backbone.preprocessing,
    dim: backbone.dim,
    image_size: backbone.imageSize,
    count: rows.length,
    skipped,
    tool: 'embedding-extractor/0.1.0',
  }
  fs.writeFileSync(metadataPath(opts.outPath), JSON.stringify(metadata, null, 2) + '\n', 'utf8')
  return { count: rows.length, dim: backbone.dim, skipped, outPath: opts.outPath }
}

export type { Backbone }
