import * as fs from 'node:fs'
import * as os from 'node:os'

/**
 * NPY v1.0 container for little-endian float32 arrays, byte-compatible with
 * the metrics library on the other side of the file boundary: magic
 * `\x93NUMPY`, version (1,0), uint16-LE header length, an ASCII header dict
 * with exactly descr/'<f4', fortran_order/False and shape, space-padded so
 * the payload starts on a 64-byte boundary, newline-terminated.
 */

export const MAGIC = Buffer.from('\x93NUMPY', 'latin1')

/** A container violation; `field` names the offending header field. */
export class NpyError extends Error {
  field: string
  constructor(field: string, message: string) {
    super(`${field}: ${message}`)
    this.field = field
  }
}

function shapeRepr(shape: number[]): string {
  return shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(', ')})`
}

export function buildHeader(shape: number[]): Buffer {
  let body = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeRepr(shape)}, }`
  let unpadded = MAGIC.length + 2 + 2 + body.length + 1
  let pad = (64 - (unpadded % 64)) % 64
  let header = body + ' '.repeat(pad) + '\n'
  let out = Buffer.alloc(2 + header.length)
  out.writeUInt16LE(header.length, 0)
  out.write(header, 2, 'latin1')
  return out
}

export function writeNpy(path: string, data: Float32Array, shape: number[]): void {
  let count = shape.reduce((a, b) => a * b, 1)
  if (count !== data.length) {
    throw new NpyError('shape', `shape ${shapeRepr(shape)} does not match ${data.length} values`)
  }
  let payload: Buffer
  if (os.endianness() === 'LE') {
    payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength)
  } else {
    payload = Buffer.alloc(data.length * 4)
    for (let i = 0; i < data.length; i++) payload.writeFloatLE(data[i], i * 4)
  }
  fs.writeFileSync(path, Buffer.concat([MAGIC, Buffer.from([1, 0]), buildHeader(shape), payload]))
}

export interface NpyArray {
  shape: number[]
  data: Float32Array
}

const HEADER_RE =
  /^\{'descr': '([^']*)', 'fortran_order': (True|False), 'shape': \((\d*|\d+(?:, \d+)*),?\), \}\s*\n$/

export function parseNpy(buf: Buffer): NpyArray {
  if (buf.length < MAGIC.length + 4 || !buf.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new NpyError('magic', 'not an NPY file')
  }
  if (buf[6] !== 1 || buf[7] !== 0) {
    throw new NpyError('version', `expected 1.0, found ${buf[6]}.${buf[7]}`)
  }
  let hlen = buf.readUInt16LE(8)
  let start = 10 + hlen
  if (buf.length < start) throw new NpyError('header length', 'header extends past end of file')
  let header = buf.subarray(10, start).toString('latin1')
  if (!header.endsWith('\n')) throw new NpyError('header terminator', 'header does not end with newline')
  let m = HEADER_RE.exec(header)
  if (!m) throw new NpyError('header dict', `unrecognized header: ${JSON.stringify(header.trim())}`)
  if (m[1] !== '<f4') throw new NpyError('descr', `expected '<f4', found '${m[1]}'`)
  if (m[2] !== 'False') throw new NpyError('fortran_order', 'must be False (C-order)')
  let shape = m[3] === '' ? [] : m[3].split(', ').map(Number)
  let count = shape.reduce((a, b) => a * b, 1)
  if (buf.length - start !== count * 4) {
    throw new NpyError('data size', `expected ${count * 4} bytes after header, found ${buf.length - start}`)
  }
  let data = new Float32Array(count)
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(start + i * 4)
  return { shape, data }
}

export function readNpy(path: string): NpyArray {
  return parseNpy(fs.readFileSync(path))
}
