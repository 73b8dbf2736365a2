import * as fs from 'node:fs'
import * as path from 'node:path'
import type { io } from '@tensorflow/tfjs'

/**
 * Filesystem IOHandler for tfjs model artifacts: a directory holding
 * `model.json` (topology + weights manifest) and binary weight shards, the
 * layout produced by the standard converters.  Handles both load and save,
 * so locally built models round-trip through the same format.
 */

function toBuffers(weightData: ArrayBuffer | ArrayBuffer[]): Buffer[] {
  let parts = Array.isArray(weightData) ? weightData : [weightData]
  return parts.map((p) => Buffer.from(p))
}

export function fileSystemIO(dir: string): io.IOHandler {
  return {
    async load(): Promise<io.ModelArtifacts> {
      let modelJson = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf8'))
      let manifest: Array<{ paths: string[]; weights: io.WeightsManifestEntry[] }> =
        modelJson.weightsManifest ?? []
      let specs = manifest.flatMap((group) => group.weights)
      let shards = manifest.flatMap((group) => group.paths)
        .map((p) => fs.readFileSync(path.join(dir, p)))
      let joined = Buffer.concat(shards)
      let weightData = joined.buffer.slice(joined.byteOffset, joined.byteOffset + joined.byteLength)
      return {
        modelTopology: modelJson.modelTopology,
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        convertedBy: modelJson.convertedBy,
        trainingConfig: modelJson.trainingConfig,
        weightSpecs: specs,
        weightData,
      }
    },

    async save(artifacts: io.ModelArtifacts): Promise<io.SaveResult> {
      fs.mkdirSync(dir, { recursive: true })
      let weights = Buffer.concat(toBuffers(artifacts.weightData ?? new ArrayBuffer(0)))
      fs.writeFileSync(path.join(dir, 'weights.bin'), weights)
      let modelJson = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy ?? null,
        trainingConfig: artifacts.trainingConfig,
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      }
      fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson))
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON',
          weightDataBytes: weights.byteLength,
        },
      }
    },
  }
}
