/** Restriction levels understood by the simulation core. */
export type RestrictionLevel = "free" | "confine" | "isolate" | "hospitalize";

/** Per-person restriction mapping applied at one day boundary. */
export type Plan = Record<string | number, RestrictionLevel>;

/** One day's summary record, mirroring a row of curve.csv. */
export interface DayRecord {
  day: number;
  new_infections: number;
  cumulative_infected: number;
  susceptible: number;
  pre_symptomatic: number;
  symptomatic: number;
  recovered: number;
  interventions_applied: number;
}

/** Aggregate health-state counts at the current day boundary. */
export interface StateSummary {
  susceptible: number;
  pre_symptomatic: number;
  symptomatic: number;
  recovered: number;
  cumulative_infected: number;
  day: number;
  people: number;
}

/** Result of opening a session. */
export interface OpenInfo {
  day: number;
  people: number;
  days: number;
  summary: StateSummary;
}

/** Options for spawning the simulation core. */
export interface SessionOptions {
  /** Python interpreter to launch; defaults to "python3" or $EPIMOB_PYTHON. */
  pythonPath?: string;
  /** Extra interpreter arguments before "-m epimob session". */
  pythonArgs?: string[];
  /** Working directory for the child process. */
  cwd?: string;
  /** Per-request timeout in milliseconds (default 120000). */
  timeoutMs?: number;
}
