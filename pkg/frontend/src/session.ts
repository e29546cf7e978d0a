import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

import type {
  DayRecord,
  OpenInfo,
  Plan,
  SessionOptions,
  StateSummary,
} from "./types.js";

interface WireResponse {
  ok: boolean;
  result?: unknown;
  error?: string;
}

/** Error reported by the simulation core; message comes through verbatim. */
export class SessionError extends Error {}

/** The session (or its child process) is no longer usable. */
export class SessionClosedError extends SessionError {}

interface Pending {
  resolve: (value: unknown) => void;
  reject: (error: Error) => void;
  timer: NodeJS.Timeout;
}

/**
 * Handle to one simulation run served by the core's session protocol.
 *
 * The core is spawned as a child process speaking line-delimited JSON on
 * stdio.  Requests are serialized: the protocol answers strictly in
 * order, so a FIFO of pending resolvers pairs responses to requests.  A
 * failed request leaves the simulation state unchanged; a dead child
 * rejects everything in flight.
 */
export class SimulationSession {
  private readonly child: ChildProcessWithoutNullStreams;
  private readonly reader: Interface;
  private readonly timeoutMs: number;
  private readonly pending: Pending[] = [];
  private queue: Promise<unknown> = Promise.resolve();
  private closed = false;
  private exitError: Error | null = null;

  private constructor(child: ChildProcessWithoutNullStreams, timeoutMs: number) {
    this.child = child;
    this.timeoutMs = timeoutMs;
    this.reader = createInterface({ input: child.stdout });
    this.reader.on("line", (line) => this.consume(line));
    child.on("exit", (code) => {
      if (!this.closed) {
        this.failAll(new SessionClosedError(`simulation core exited (code ${code})`));
      }
    });
    child.on("error", (error) => this.failAll(new SessionClosedError(error.message)));
  }

  /** Spawn the core and open a scenario; resolves once the run is ready. */
  static async open(
    scenario: string,
    seed = 0,
    options: SessionOptions = {},
  ): Promise<{ session: SimulationSession; info: OpenInfo }> {
    const python = options.pythonPath ?? process.env.EPIMOB_PYTHON ?? "python3";
    const args = [...(options.pythonArgs ?? []), "-m", "epimob", "session"];
    const child = spawn(python, args, {
      cwd: options.cwd,
      stdio: ["pipe", "pipe", "pipe"],
    });
    const session = new SimulationSession(child, options.timeoutMs ?? 120_000);
    try {
      const info = (await session.request({ op: "open", scenario, seed })) as OpenInfo;
      return { session, info };
    } catch (error) {
      await session.dispose();
      throw error;
    }
  }

  /** True once close() resolved or the child died. */
  get isClosed(): boolean {
    return this.closed || this.exitError !== null;
  }

  /** Process id of the simulation core (for resource monitoring). */
  get pid(): number | undefined {
    return this.child.pid;
  }

  /**
   * Advance one day (mobility, epidemic, day-boundary intervention).
   * A plan replaces the built-in strategy at this boundary; entries take
   * effect the following day.
   */
  async stepDay(plan?: Plan): Promise<DayRecord> {
    const request: Record<string, unknown> = { op: "step_day" };
    if (plan !== undefined) {
      request.plan = plan;
    }
    return (await this.request(request)) as DayRecord;
  }

  /** Aggregate health-state counts. */
  async querySummary(): Promise<StateSummary> {
    return (await this.request({ op: "query", selector: "summary" })) as StateSummary;
  }

  /** Per-person health states, indexed by person id. */
  async queryPeople(): Promise<string[]> {
    const result = (await this.request({ op: "query", selector: "people" })) as {
      states: string[];
    };
    return result.states;
  }

  /** Traced contacts of the last completed day's confirmed cases, per hop. */
  async queryTraced(order = 1): Promise<number[][]> {
    const result = (await this.request({ op: "query", selector: "traced", order })) as {
      orders: number[][];
    };
    return result.orders;
  }

  /** Close the session and wait for the core to exit. */
  async close(): Promise<void> {
    if (this.isClosed) {
      return;
    }
    await this.request({ op: "close" });
    this.closed = true;
    await this.dispose();
  }

  // -- plumbing ------------------------------------------------------------

  private request(body: Record<string, unknown>): Promise<unknown> {
    const run = () => this.send(body);
    const next = this.queue.then(run, run);
    this.queue = next.catch(() => undefined);
    return next;
  }

  private send(body: Record<string, unknown>): Promise<unknown> {
    if (this.exitError) {
      return Promise.reject(this.exitError);
    }
    if (this.closed) {
      return Promise.reject(new SessionClosedError("session is closed"));
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        const index = this.pending.findIndex((p) => p.timer === timer);
        if (index >= 0) {
          this.pending.splice(index, 1);
        }
        reject(new SessionError(`request timed out after ${this.timeoutMs} ms`));
      }, this.timeoutMs);
      this.pending.push({ resolve, reject, timer });
      this.child.stdin.write(JSON.stringify(body) + "\n", (error) => {
        if (error) {
          clearTimeout(timer);
          reject(new SessionClosedError(error.message));
        }
      });
    });
  }

  private consume(line: string): void {
    const trimmed = line.trim();
    if (!trimmed) {
      return;
    }
    const next = this.pending.shift();
    if (!next) {
      return; // unsolicited output; nothing waits on it
    }
    clearTimeout(next.timer);
    let parsed: WireResponse;
    try {
      parsed = JSON.parse(trimmed) as WireResponse;
    } catch (error) {
      next.reject(new SessionError(`malformed response: ${String(error)}`));
      return;
    }
    if (parsed.ok) {
      next.resolve(parsed.result);
    } else {
      next.reject(new SessionError(parsed.error ?? "unknown core error"));
    }
  }

  private failAll(error: Error): void {
    this.exitError = error;
    while (this.pending.length) {
      const entry = this.pending.shift()!;
      clearTimeout(entry.timer);
      entry.reject(error);
    }
  }

  private dispose(): Promise<void> {
    this.reader.close();
    this.child.stdin.end();
    if (this.child.exitCode !== null) {
      return Promise.resolve();
    }
    return new Promise((resolve) => {
      const force = setTimeout(() => {
        this.child.kill("SIGKILL");
        resolve();
      }, 5_000);
      this.child.once("exit", () => {
        clearTimeout(force);
        resolve();
      });
    });
  }
}
