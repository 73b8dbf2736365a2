import * as crypto from 'node:crypto'
import * as fs from 'node:fs'
import * as path from 'node:path'
import { mulberry32 } from './prng.js'
import { fileSystemIO } from './model_io.js'

/**
 * A backbone turns resized RGB images into fixed-width embedding rows.
 * The neural backbones are preprocessing+model configurations over a
 * user-supplied tfjs model directory (weights are never bundled); the
 * projection backbone is weight-free and fully deterministic, for tests
 * and smoke runs.
 */
export interface Backbone {
  name: string
  dim: number
  imageSize: number
  weightsId: string
  preprocessing: string
  /** images: resized [0,1] RGB HWC arrays of length imageSize^2*3 */
  embedBatch(images: Float32Array[]): Promise<Float32Array[]>
}

export type BackboneName = 'vgg16-penultimate' | 'dino-vit' | 'clip-image' | 'projection-v1'

export const BACKBONE_NAMES: BackboneName[] = [
  'vgg16-penultimate',
  'dino-vit',
  'clip-image',
  'projection-v1',
]

export interface ExtractorSpec {
  backbone: BackboneName
  batchSize: number
  device: string
  imageSize?: number // backbone default when omitted
  modelDir?: string // required for the neural backbones
}

// --- weight-free deterministic backbone --------------------------------------

const PROJECTION_SEED = 0x5eed
const PROJECTION_TAPS = 24
const PROJECTION_DIM = 512

export function projectionBackbone(imageSize = 64): Backbone {
  let npix = imageSize * imageSize * 3
  let rng = mulberry32(PROJECTION_SEED)
  let taps = new Int32Array(PROJECTION_DIM * PROJECTION_TAPS)
  let signs = new Float32Array(PROJECTION_DIM * PROJECTION_TAPS)
  for (let i = 0; i < taps.length; i++) {
    taps[i] = Math.floor(rng() * npix)
    signs[i] = rng() < 0.5 ? -1 : 1
  }
  let scale = 1 / Math.sqrt(PROJECTION_TAPS)
  return {
    name: 'projection-v1',
    dim: PROJECTION_DIM,
    imageSize,
    weightsId: `builtin:projection-v1/seed=0x${PROJECTION_SEED.toString(16)}/taps=${PROJECTION_TAPS}/size=${imageSize}`,
    preprocessing: `resize ${imageSize}x${imageSize} bilinear, RGB in [0,1] centered at 0.5, signed sparse projection`,
    async embedBatch(images) {
      return images.map((px) => {
        let out = new Float32Array(PROJECTION_DIM)
        for (let j = 0; j < PROJECTION_DIM; j++) {
          let acc = 0
          let base = j * PROJECTION_TAPS
          for (let t = 0; t < PROJECTION_TAPS; t++) {
            acc += signs[base + t] * (px[taps[base + t]] - 0.5)
          }
          out[j] = acc * scale
        }
        return out
      })
    },
  }
}

// --- tfjs-backed backbones -----------------------------------------------------

type Normalization = 'caffe-bgr' | 'imagenet' | 'clip'

interface TfjsConfig {
  imageSize: number
  dim: number
  normalization: Normalization
  preprocessing: string
}

const TFJS_CONFIGS: Record<Exclude<BackboneName, 'projection-v1'>, TfjsConfig> = {
  'vgg16-penultimate': {
    imageSize: 224,
    dim: 4096,
    normalization: 'caffe-bgr',
    preprocessing:
      'resize 224x224 bilinear, RGB->BGR, x*255 minus ImageNet channel means (caffe); penultimate fully-connected activations',
  },
  'dino-vit': {
    imageSize: 224,
    dim: 768,
    normalization: 'imagenet',
    preprocessing: 'resize 224x224 bilinear, RGB in [0,1], ImageNet mean/std; class-token embedding',
  },
  'clip-image': {
    imageSize: 224,
    dim: 512,
    normalization: 'clip',
    preprocessing: 'resize 224x224 bilinear, RGB in [0,1], CLIP mean/std; image-encoder embedding',
  },
}

const NORMALIZERS: Record<Normalization, (px: Float32Array) => Float32Array> = {
  'caffe-bgr': (px) => {
    let mean = [103.939, 116.779, 123.68] // BGR order
    let out = new Float32Array(px.length)
    for (let p = 0; p < px.length; p += 3) {
      out[p] = px[p + 2] * 255 - mean[0]
      out[p + 1] = px[p + 1] * 255 - mean[1]
      out[p + 2] = px[p] * 255 - mean[2]
    }
    return out
  },
  imagenet: (px) => channelNormalize(px, [0.485, 0.456, 0.406], [0.229, 0.224, 0.225]),
  clip: (px) =>
    channelNormalize(px, [0.48145466, 0.4578275, 0.40821073], [0.26862954, 0.26130258, 0.27577711]),
}

function channelNormalize(px: Float32Array, mean: number[], std: number[]): Float32Array {
  let out = new Float32Array(px.length)
  for (let p = 0; p < px.length; p += 3) {
    out[p] = (px[p] - mean[0]) / std[0]
    out[p + 1] = (px[p + 1] - mean[1]) / std[1]
    out[p + 2] = (px[p + 2] - mean[2]) / std[2]
  }
  return out
}

function modelWeightsId(modelDir: string): string {
  let raw = fs.readFileSync(path.join(modelDir, 'model.json'))
  let digest = crypto.createHash('sha256').update(raw).digest('hex').slice(0, 16)
  return `${path.basename(modelDir)}@sha256:${digest}`
}

export interface TfjsBackboneOptions {
  name: string
  modelDir: string
  imageSize: number
  dim: number
  normalization: Normalization
  preprocessing: string
  device?: string
}

/** Load a tfjs model directory (graph or layers format) as a backbone. */
export async function tfjsBackboneFromDir(opts: TfjsBackboneOptions): Promise<Backbone> {
  const tf = await import('@tensorflow/tfjs')
  await tf.setBackend(opts.device && opts.device !== 'cpu' ? opts.device : 'cpu')
  await tf.ready()
  let modelJson = JSON.parse(fs.readFileSync(path.join(opts.modelDir, 'model.json'), 'utf8'))
  let handler = fileSystemIO(opts.modelDir)
  let isGraph = modelJson.format === 'graph-model'
  let model = isGraph ? await tf.loadGraphModel(handler) : await tf.loadLayersModel(handler)
  let normalize = NORMALIZERS[opts.normalization]
  let size = opts.imageSize
  return {
    name: opts.name,
    dim: opts.dim,
    imageSize: size,
    weightsId: modelWeightsId(opts.modelDir),
    preprocessing: opts.preprocessing,
    async embedBatch(images) {
      let batch = images.length
      let stacked = new Float32Array(batch * size * size * 3)
      images.forEach((px, i) => stacked.set(normalize(px), i * size * size * 3))
      let input = tf.tensor4d(stacked, [batch, size, size, 3])
      let output = model.predict(input) as InstanceType<typeof tf.Tensor>
      let flat = output.reshape([batch, -1])
      let width = flat.shape[1] ?? 0
      if (width !== opts.dim) {
        input.dispose()
        output.dispose()
        flat.dispose()
        throw new Error(
          `backbone ${opts.name}: model emits ${width} features per image, expected ${opts.dim}`,
        )
      }
      let values = (await flat.data()) as Float32Array
      input.dispose()
      output.dispose()
      flat.dispose()
      let rows: Float32Array[] = []
      for (let i = 0; i < batch; i++) rows.push(values.slice(i * opts.dim, (i + 1) * opts.dim))
      return rows
    },
  }
}

export async function createBackbone(spec: ExtractorSpec): Promise<Backbone> {
  if (spec.backbone === 'projection-v1') {
    return projectionBackbone(spec.imageSize ?? 64)
  }
  let config = TFJS_CONFIGS[spec.backbone]
  if (!config) throw new Error(`unknown backbone: ${spec.backbone}`)
  if (!spec.modelDir) {
    throw new Error(
      `backbone ${spec.backbone} needs --model-dir pointing at a tfjs model directory ` +
        '(weights are not bundled)',
    )
  }
  return tfjsBackboneFromDir({
    name: spec.backbone,
    modelDir: spec.modelDir,
    imageSize: spec.imageSize ?? config.imageSize,
    dim: config.dim,
    normalization: config.normalization,
    preprocessing: config.preprocessing,
    device: spec.device,
  })
}
