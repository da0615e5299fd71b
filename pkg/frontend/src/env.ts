/**
 * Gym-style environment over the console toolkit.
 *
 * Each env owns one `vcle env-serve` child process and exposes the
 * standard calling convention: `reset(seed)`, `step(action)` returning
 * `{observation, reward, done, info}`, `render()` and `close()`. The
 * observations are produced by the primary implementation and cross the
 * boundary byte-exactly.
 */

import { EnvServiceClient } from "./client.js";
import {
  decodeObservation,
  DiscreteSpace,
  Observation,
  ObservationSpace,
} from "./spaces.js";

/** Registered environment names and the variants they map to. */
export const REGISTRY: Record<string, string> = {
  "Kula-v1": "fixed-v1",
  "Kula-random-v1": "random-v1",
  "Kula-audio-v1": "audio-v1",
};

export interface StepResult {
  observation: Observation;
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

export interface KulaEnvOptions {
  /** Command used to launch the toolkit; override with VCLE_CMD. */
  command?: string;
  /** Extra CLI arguments, e.g. ["--eval"] or ["--level", "2"]. */
  extraArgs?: string[];
}

export class KulaEnv {
  readonly variant: string;
  actionSpace!: DiscreteSpace;
  observationSpace!: ObservationSpace;
  private client: EnvServiceClient;
  private ready: Promise<void>;

  constructor(variant: string, options: KulaEnvOptions = {}) {
    this.variant = variant;
    const command = options.command ?? process.env.VCLE_CMD ?? "vcle";
    const args = ["env-serve", "--variant", variant, ...(options.extraArgs ?? [])];
    this.client = new EnvServiceClient(command, args);
    this.ready = this.client.request({ op: "spaces" }).then((response) => {
      this.actionSpace = response.action_space;
      this.observationSpace = response.observation_space;
    });
  }

  /** Resolves once the child is up and spaces are declared. */
  async waitReady(): Promise<void> {
    await this.ready;
  }

  async reset(seed: number | null = null): Promise<Observation> {
    await this.ready;
    const response = await this.client.request({ op: "reset", seed });
    return decodeObservation(response.observation);
  }

  async step(action: number): Promise<StepResult> {
    await this.ready;
    const response = await this.client.request({ op: "step", action });
    return {
      observation: decodeObservation(response.observation),
      reward: response.reward,
      done: response.done,
      info: response.info,
    };
  }

  async render(): Promise<string> {
    await this.ready;
    const response = await this.client.request({ op: "render" });
    return response.text;
  }

  async close(): Promise<void> {
    await this.client.dispose();
  }
}

/** Gym-style factory over the registered environment names. */
export function make(name: string, options: KulaEnvOptions = {}): KulaEnv {
  const variant = REGISTRY[name];
  if (!variant) {
    throw new Error(
      `unknown environment ${name}; known: ${Object.keys(REGISTRY).join(", ")}`
    );
  }
  return new KulaEnv(variant, options);
}
