import * as fs from 'node:fs'
import * as path from 'node:path'
import { PNG } from 'pngjs'
import * as jpeg from 'jpeg-js'
import { mulberry32 } from '../src/prng.js'

export function noisePngBytes(seed: number, width = 32, height = 32): Buffer {
  let png = new PNG({ width, height })
  let rng = mulberry32(seed)
  for (let i = 0; i < width * height * 4; i += 4) {
    png.data[i] = Math.floor(rng() * 256)
    png.data[i + 1] = Math.floor(rng() * 256)
    png.data[i + 2] = Math.floor(rng() * 256)
    png.data[i + 3] = 255
  }
  return PNG.sync.write(png)
}

export function gradientJpegBytes(width = 40, height = 24): Buffer {
  let data = Buffer.alloc(width * height * 4)
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let p = (y * width + x) * 4
      data[p] = Math.floor((255 * x) / (width - 1))
      data[p + 1] = Math.floor((255 * y) / (height - 1))
      data[p + 2] = 128
      data[p + 3] = 255
    }
  }
  return jpeg.encode({ data, width, height }, 90).data as Buffer
}

export interface FixtureDir {
  dir: string
  files: string[]
  duplicatePair: [string, string]
}

/**
 * A 20-image fixture: 18 distinct noise PNGs plus one JPEG, with the last
 * PNG a byte-identical duplicate of the first.
 */
export function writeFixtureDir(dir: string): FixtureDir {
  fs.mkdirSync(dir, { recursive: true })
  let files: string[] = []
  let first = noisePngBytes(1000)
  for (let i = 0; i < 18; i++) {
    let name = `img${String(i).padStart(2, '0')}.png`
    fs.writeFileSync(path.join(dir, name), i === 0 ? first : noisePngBytes(1000 + i))
    files.push(name)
  }
  fs.writeFileSync(path.join(dir, 'img18.jpg'), gradientJpegBytes())
  files.push('img18.jpg')
  fs.writeFileSync(path.join(dir, 'img19_copy_of_00.png'), first)
  files.push('img19_copy_of_00.png')
  files.sort()
  return { dir, files, duplicatePair: ['img00.png', 'img19_copy_of_00.png'] }
}
