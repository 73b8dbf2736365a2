#!/usr/bin/env node
import { BACKBONE_NAMES, BackboneName, ExtractorSpec } from './backbones.js'
import { extractDirectory } from './extract.js'
import { formatReport, verifyFile } from './verify.js'

const USAGE = `usage:
  extractor extract --backbone <name> --images <dir> --out <file.npy>
                    [--batch-size 16] [--image-size N] [--model-dir <dir>]
                    [--device cpu] [--strict]
  extractor verify --file <file.npy>

backbones: ${BACKBONE_NAMES.join(', ')}
(the neural backbones need --model-dir with tfjs model artifacts;
 projection-v1 is weight-free and deterministic)`

function parseFlags(argv: string[]): Map<string, string | boolean> {
  let flags = new Map<string, string | boolean>()
  for (let i = 0; i < argv.length; i++) {
    let arg = argv[i]
    if (!arg.startsWith('--')) throw new Error(`unexpected argument: ${arg}`)
    let key = arg.slice(2)
    if (i + 1 < argv.length && !argv[i + 1].startsWith('--')) {
      flags.set(key, argv[++i])
    } else {
      flags.set(key, true)
    }
  }
  return flags
}

function requireString(flags: Map<string, string | boolean>, key: string): string {
  let value = flags.get(key)
  if (typeof value !== 'string') throw new Error(`missing required flag --${key}`)
  return value
}

async function runExtract(argv: string[]): Promise<number> {
  let flags = parseFlags(argv)
  let backbone = requireString(flags, 'backbone') as BackboneName
  if (!BACKBONE_NAMES.includes(backbone)) {
    throw new Error(`unknown backbone ${backbone}; choose from ${BACKBONE_NAMES.join(', ')}`)
  }
  let spec: ExtractorSpec = {
    backbone,
    batchSize: Number(flags.get('batch-size') ?? 16),
    device: String(flags.get('device') ?? 'cpu'),
    modelDir: typeof flags.get('model-dir') === 'string' ? String(flags.get('model-dir')) : undefined,
    imageSize: flags.has('image-size') ? Number(flags.get('image-size')) : undefined,
  }
  if (!Number.isInteger(spec.batchSize) || spec.batchSize < 1) {
    throw new Error('--batch-size must be a positive integer')
  }
  let result = await extractDirectory({
    imagesDir: requireString(flags, 'images'),
    outPath: requireString(flags, 'out'),
    spec,
    strict: flags.get('strict') === true,
  })
  process.stderr.write(
    `wrote ${result.count}x${result.dim} matrix to ${result.outPath}` +
      (result.skipped.length ? ` (skipped ${result.skipped.length})` : '') +
      '\n',
  )
  return 0
}

function runVerify(argv: string[]): number {
  let flags = parseFlags(argv)
  let report = verifyFile(requireString(flags, 'file'))
  process.stdout.write(formatReport(report) + '\n')
  return report.ok ? 0 : 1
}

async function main(): Promise<number> {
  let [command, ...rest] = process.argv.slice(2)
  try {
    if (command === 'extract') return await runExtract(rest)
    if (command === 'verify') return runVerify(rest)
    process.stderr.write(USAGE + '\n')
    return command === undefined || command === '--help' ? 0 : 2
  } catch (e) {
    process.stderr.write(`error: ${(e as Error).message}\n`)
    return 1
  }
}

main().then((code) => {
  process.exitCode = code
})
