import * as fs from 'node:fs'
import { NpyError, parseNpy } from './npy.js'
import { idsPath, metadataPath } from './extract.js'

/**
 * Validation report for an embedding file: container header conformance,
 * payload size, finiteness, id-sidecar agreement, and metadata/dim
 * agreement.  Failures are report lines, not exceptions.
 */

export interface CheckResult {
  name: string
  pass: boolean
  detail: string
}

export interface VerifyReport {
  ok: boolean
  checks: CheckResult[]
}

export function verifyFile(file: string): VerifyReport {
  let checks: CheckResult[] = []
  let push = (name: string, pass: boolean, detail: string) => checks.push({ name, pass, detail })

  let buf: Buffer | null = null
  try {
    buf = fs.readFileSync(file)
    push('readable', true, `${buf.length} bytes`)
  } catch (e) {
    push('readable', false, (e as Error).message)
    return { ok: false, checks }
  }

  let parsed = null
  try {
    parsed = parseNpy(buf)
    if (parsed.shape.length !== 2) {
      push('header', false, `expected a 2-D matrix, found shape (${parsed.shape.join(', ')})`)
      parsed = null
    } else {
      push('header', true, `NPY v1.0 '<f4' C-order, shape (${parsed.shape.join(', ')})`)
    }
  } catch (e) {
    let field = e instanceof NpyError ? e.field : 'header'
    push('header', false, `${field}: ${(e as Error).message}`)
  }
  if (!parsed) return { ok: false, checks }

  let [n, dim] = parsed.shape
  if (n < 1 || dim < 1) {
    push('shape', false, `matrix must have N >= 1 and D >= 1, found ${n}x${dim}`)
  } else {
    push('shape', true, `${n} rows x ${dim} columns`)
  }

  let finite = true
  let badRow = -1
  for (let i = 0; i < parsed.data.length; i++) {
    if (!Number.isFinite(parsed.data[i])) {
      finite = false
      badRow = Math.floor(i / dim)
      break
    }
  }
  push('finite', finite, finite ? 'all values finite' : `non-finite value in row ${badRow}`)

  let ids = idsPath(file)
  if (fs.existsSync(ids)) {
    let lines = fs.readFileSync(ids, 'utf8').split('\n')
    if (lines[lines.length - 1] === '') lines.pop()
    push(
      'ids',
      lines.length === n,
      lines.length === n
        ? `${lines.length} ids match ${n} rows`
        : `${lines.length} ids for ${n} rows`,
    )
  } else {
    push('ids', true, 'no sidecar; ids default to row indices')
  }

  let meta = metadataPath(file)
  if (fs.existsSync(meta)) {
    try {
      let obj = JSON.parse(fs.readFileSync(meta, 'utf8'))
      let declared = obj.dim
      push(
        'metadata',
        declared === dim,
        declared === dim
          ? `backbone ${obj.backbone}, dim ${declared}`
          : `metadata dim ${declared} != matrix dim ${dim}`,
      )
    } catch (e) {
      push('metadata', false, `unreadable metadata: ${(e as Error).message}`)
    }
  } else {
    push('metadata', true, 'no metadata sidecar')
  }

  return { ok: checks.every((c) => c.pass), checks }
}

export function formatReport(report: VerifyReport): string {
  return report.checks
    .map((c) => `${c.pass ? 'PASS' : 'FAIL'} ${c.name}: ${c.detail}`)
    .join('\n')
}
