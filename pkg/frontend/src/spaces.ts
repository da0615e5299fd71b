/** Observation and action space descriptors, mirroring the Python side. */

export interface BoxSpace {
  type: "box";
  shape: number[];
  dtype: string;
  low?: number;
  high?: number;
}

export interface DiscreteSpace {
  type: "discrete";
  n: number;
}

export interface DictSpace {
  type: "dict";
  spaces: Record<string, unknown>;
}

export type ObservationSpace = BoxSpace | DictSpace;

/** One decoded array observation. */
export interface BoxObservation {
  kind: "box";
  dtype: string;
  shape: number[];
  data: Uint8Array;
}

/** Composite observation: visual tensor, optional sound, clock and score. */
export interface DictObservation {
  kind: "dict";
  visual: BoxObservation;
  sound: BoxObservation | null;
  clock: number;
  score: number;
}

export type Observation = BoxObservation | DictObservation;

export function decodeObservation(raw: any): Observation {
  if (raw.kind === "dict") {
    return {
      kind: "dict",
      visual: decodeObservation(raw.visual) as BoxObservation,
      sound: raw.sound === null ? null : (decodeObservation(raw.sound) as BoxObservation),
      clock: raw.clock,
      score: raw.score,
    };
  }
  return {
    kind: "box",
    dtype: raw.dtype,
    shape: raw.shape,
    data: new Uint8Array(Buffer.from(raw.data_b64, "base64")),
  };
}

/**
 * Canonical observation bytes, identical to the primary side's hashing
 * basis: box states are the raw tensor bytes; composite states concatenate
 * visual bytes, sound bytes, the clock as a big-endian float64 and the
 * score as a big-endian u64.
 */
export function observationBytes(obs: Observation): Buffer {
  if (obs.kind === "box") {
    return Buffer.from(obs.data);
  }
  const clock = Buffer.alloc(8);
  clock.writeDoubleBE(obs.clock);
  const score = Buffer.alloc(8);
  score.writeBigUInt64BE(BigInt(obs.score));
  return Buffer.concat([
    Buffer.from(obs.visual.data),
    obs.sound === null ? Buffer.alloc(0) : Buffer.from(obs.sound.data),
    clock,
    score,
  ]);
}
