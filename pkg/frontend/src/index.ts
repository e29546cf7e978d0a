export { SimulationSession, SessionError, SessionClosedError } from "./session.js";
export type {
  DayRecord,
  OpenInfo,
  Plan,
  RestrictionLevel,
  SessionOptions,
  StateSummary,
} from "./types.js";
