/**
 * Adapter acceptance: byte/value parity with the primary implementation,
 * Gym API conformance and seeding reproducibility.
 *
 * Parity works against JSON-lines trajectory logs produced by the
 * primary's own CLI (`vcle play --trace`): the adapter replays the same
 * actions through `env-serve` and must observe identical state hashes,
 * rewards and done flags at every step.
 */

import { execFile } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ChildCrashError, KulaEnv, make, observationBytes, RemoteEnvError } from "../src/index.js";

const run = promisify(execFile);
const VCLE = process.env.VCLE_CMD ?? "vcle";

const SEEDS = [101, 202, 303, 404, 505, 606, 707, 808, 909, 1010];

interface TraceLine {
  type: "header" | "reset" | "step";
  seed?: number | null;
  action?: number;
  reward?: number;
  done?: boolean;
  state_sha256?: string;
  info?: Record<string, unknown>;
}

let workDir: string;
const traces = new Map<number, TraceLine[]>();

function sha256(data: Buffer): string {
  return createHash("sha256").update(data).digest("hex");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "kula-adapter-"));
  await Promise.all(
    SEEDS.map(async (seed) => {
      const tracePath = join(workDir, `trace-${seed}.jsonl`);
      await run(VCLE, [
        "play", "--variant", "fixed-v1", "--episodes", "5", "--max-moves", "20",
        "--seed", String(seed), "--out", join(workDir, `out-${seed}`),
        "--trace", tracePath,
      ]);
      const lines = readFileSync(tracePath, "utf-8")
        .trim()
        .split("\n")
        .map((line) => JSON.parse(line) as TraceLine);
      traces.set(seed, lines);
    })
  );
});

afterAll(() => {
  rmSync(workDir, { recursive: true, force: true });
});

describe("trajectory parity with the primary implementation", () => {
  it("replays 10 seeded trajectories with identical hashes, rewards and done flags", async () => {
    for (const seed of SEEDS) {
      const env = make("Kula-v1");
      try {
        let steps = 0;
        for (const line of traces.get(seed)!) {
          if (line.type === "header") continue;
          if (line.type === "reset") {
            const obs = await env.reset(line.seed ?? null);
            expect(sha256(observationBytes(obs))).toBe(line.state_sha256);
          } else {
            const result = await env.step(line.action!);
            steps += 1;
            expect(sha256(observationBytes(result.observation))).toBe(line.state_sha256);
            expect(result.reward).toBe(line.reward);
            expect(result.done).toBe(line.done);
            const expected = line.info!;
            expect(result.info.score).toBe(expected.score);
            expect(result.info.clock).toBe(expected.clock);
            expect(result.info.duration_game).toBe(expected.duration_game);
            expect(result.info.cause ?? null).toBe(expected.cause ?? null);
          }
        }
        expect(steps).toBeGreaterThan(0);
      } finally {
        await env.close();
      }
    }
  });
});

describe("Gym API conformance", () => {
  it("declares discrete(4) actions and the box observation space", async () => {
    const env = make("Kula-v1");
    try {
      await env.waitReady();
      expect(env.actionSpace).toEqual({ type: "discrete", n: 4 });
      expect(env.observationSpace.type).toBe("box");
      if (env.observationSpace.type === "box") {
        expect(env.observationSpace.shape).toEqual([84, 84, 3]);
        expect(env.observationSpace.dtype).toBe("uint8");
      }
    } finally {
      await env.close();
    }
  });

  it("declares the composite space for the audio variant", async () => {
    const env = make("Kula-audio-v1");
    try {
      await env.waitReady();
      expect(env.observationSpace.type).toBe("dict");
      if (env.observationSpace.type === "dict") {
        expect(Object.keys(env.observationSpace.spaces).sort()).toEqual([
          "clock", "score", "sound", "visual",
        ]);
      }
      const obs = await env.reset(3);
      expect(obs.kind).toBe("dict");
      if (obs.kind === "dict") {
        expect(obs.visual.shape).toEqual([84, 84, 3]);
        expect(obs.sound!.shape).toEqual([0, 13]);
        expect(obs.score).toBe(0);
      }
    } finally {
      await env.close();
    }
  });

  it("reset returns an observation and step returns the 4-field record", async () => {
    const env = make("Kula-v1");
    try {
      const obs = await env.reset(1);
      expect(obs.kind).toBe("box");
      if (obs.kind === "box") {
        expect(obs.data.length).toBe(84 * 84 * 3);
      }
      const result = await env.step(0);
      expect(typeof result.reward).toBe("number");
      expect(typeof result.done).toBe("boolean");
      expect(result.observation.kind).toBe("box");
      expect(result.info).toHaveProperty("score");
    } finally {
      await env.close();
    }
  });

  it("renders the text grid", async () => {
    const env = make("Kula-v1");
    try {
      await env.reset(1);
      const text = await env.render();
      expect(text).toContain("status playing");
      expect(text.split("\n").length).toBeGreaterThan(1);
    } finally {
      await env.close();
    }
  });

  it("rejects out-of-range actions", async () => {
    const env = make("Kula-v1");
    try {
      await env.reset(1);
      await expect(env.step(5)).rejects.toThrowError(RemoteEnvError);
      await expect(env.step(5)).rejects.toHaveProperty("name", "BadAction");
    } finally {
      await env.close();
    }
  });

  it("rejects unknown registry names", () => {
    expect(() => make("Kula-v9")).toThrowError(/unknown environment/);
  });
});

describe("seeding reproducibility", () => {
  it("same seed gives identical observations and step sequences", async () => {
    const record = async (): Promise<string[]> => {
      const env = make("Kula-random-v1");
      const out: string[] = [];
      try {
        const first = await env.reset(424242);
        out.push(sha256(observationBytes(first)));
        for (const action of [2, 0, 1, 0, 3, 0]) {
          const result = await env.step(action);
          out.push(
            `${sha256(observationBytes(result.observation))}:${result.reward}:${result.done}`
          );
          if (result.done) {
            const obs = await env.reset(null);
            out.push(sha256(observationBytes(obs)));
          }
        }
      } finally {
        await env.close();
      }
      return out;
    };
    const [a, b] = [await record(), await record()];
    expect(a).toEqual(b);
  });
});

describe("failure handling", () => {
  it("a crashed child surfaces its log", async () => {
    const env = new KulaEnv("fixed-v1", { extraArgs: ["--totally-bogus-flag"] });
    await expect(env.reset(1)).rejects.toThrowError(ChildCrashError);
    await env.close();
  });
});
