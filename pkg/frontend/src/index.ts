export { make, KulaEnv, REGISTRY, StepResult, KulaEnvOptions } from "./env.js";
export { ChildCrashError, RemoteEnvError } from "./client.js";
export {
  decodeObservation,
  observationBytes,
  Observation,
  BoxObservation,
  DictObservation,
  ObservationSpace,
  BoxSpace,
  DictSpace,
  DiscreteSpace,
} from "./spaces.js";
