import * as fs from 'node:fs'
import * as path from 'node:path'
import { PNG } from 'pngjs'
import * as jpeg from 'jpeg-js'

/** RGB pixels in [0, 1], row-major HWC layout. */
export interface DecodedImage {
  width: number
  height: number
  data: Float32Array
}

export class DecodeError extends Error {}

const EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

export function isImagePath(file: string): boolean {
  return EXTENSIONS.has(path.extname(file).toLowerCase())
}

function rgbaToFloatRgb(rgba: Uint8Array, width: number, height: number): DecodedImage {
  let out = new Float32Array(width * height * 3)
  for (let p = 0, q = 0; p < width * height * 4; p += 4, q += 3) {
    out[q] = rgba[p] / 255
    out[q + 1] = rgba[p + 1] / 255
    out[q + 2] = rgba[p + 2] / 255
  }
  return { width, height, data: out }
}

export function decodeImageFile(file: string): DecodedImage {
  let ext = path.extname(file).toLowerCase()
  let buf = fs.readFileSync(file)
  try {
    if (ext === '.png') {
      let png = PNG.sync.read(buf)
      return rgbaToFloatRgb(png.data, png.width, png.height)
    }
    if (ext === '.jpg' || ext === '.jpeg') {
      let img = jpeg.decode(buf, { useTArray: true, maxMemoryUsageInMB: 512 })
      return rgbaToFloatRgb(img.data, img.width, img.height)
    }
  } catch (e) {
    throw new DecodeError(`cannot decode ${file}: ${(e as Error).message}`)
  }
  throw new DecodeError(`unsupported image extension: ${file}`)
}

/**
 * Bilinear resize to size x size with half-pixel-center sampling (the
 * convention of common tensor libraries with alignCorners=false).
 */
export function resizeBilinear(img: DecodedImage, size: number): Float32Array {
  if (img.width === size && img.height === size) return img.data.slice()
  let out = new Float32Array(size * size * 3)
  let sx = img.width / size
  let sy = img.height / size
  for (let y = 0; y < size; y++) {
    let fy = Math.min(Math.max((y + 0.5) * sy - 0.5, 0), img.height - 1)
    let y0 = Math.floor(fy)
    let y1 = Math.min(y0 + 1, img.height - 1)
    let wy = fy - y0
    for (let x = 0; x < size; x++) {
      let fx = Math.min(Math.max((x + 0.5) * sx - 0.5, 0), img.width - 1)
      let x0 = Math.floor(fx)
      let x1 = Math.min(x0 + 1, img.width - 1)
      let wx = fx - x0
      for (let c = 0; c < 3; c++) {
        let p00 = img.data[(y0 * img.width + x0) * 3 + c]
        let p01 = img.data[(y0 * img.width + x1) * 3 + c]
        let p10 = img.data[(y1 * img.width + x0) * 3 + c]
        let p11 = img.data[(y1 * img.width + x1) * 3 + c]
        let top = p00 + (p01 - p00) * wx
        let bottom = p10 + (p11 - p10) * wx
        out[(y * size + x) * 3 + c] = top + (bottom - top) * wy
      }
    }
  }
  return out
}

/** All image files under a directory, as sorted relative POSIX paths. */
export function listImageFiles(dir: string): string[] {
  let out: string[] = []
  let walk = (rel: string) => {
    let abs = rel ? path.join(dir, rel) : dir
    for (let entry of fs.readdirSync(abs, { withFileTypes: true })) {
      let relChild = rel ? `${rel}/${entry.name}` : entry.name
      if (entry.isDirectory()) walk(relChild)
      else if (entry.isFile() && isImagePath(entry.name)) out.push(relChild)
    }
  }
  walk('')
  out.sort()
  return out
}
