// Countdown timing for the recording wizard. Scheduling is computed from
// a monotonic clock rather than accumulated setTimeout drift, so tick
// boundaries stay within a few ms of the ideal schedule.

export interface CountdownHooks {
  onTick: (secondsLeft: number) => void;
  onDone: () => void;
}

export interface TimerApi {
  now: () => number;                 // milliseconds, monotonic
  setTimeout: (fn: () => void, ms: number) => unknown;
  clearTimeout: (handle: unknown) => void;
}

export const realTimers: TimerApi = {
  now: () => performance.now(),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (h) => clearTimeout(h as Parameters<typeof clearTimeout>[0]),
};

export class Countdown {
  private handle: unknown = null;
  private start = 0;

  constructor(private seconds: number, private hooks: CountdownHooks,
              private timers: TimerApi = realTimers) {}

  begin(): void {
    this.start = this.timers.now();
    this.hooks.onTick(this.seconds);
    this.scheduleNext(1);
  }

  private scheduleNext(tick: number): void {
    const target = this.start + tick * 1000;
    const delay = Math.max(0, target - this.timers.now());
    this.handle = this.timers.setTimeout(() => {
      const left = this.seconds - tick;
      if (left <= 0) {
        this.hooks.onTick(0);
        this.hooks.onDone();
      } else {
        this.hooks.onTick(left);
        this.scheduleNext(tick + 1);
      }
    }, delay);
  }

  cancel(): void {
    if (this.handle !== null) {
      this.timers.clearTimeout(this.handle);
      this.handle = null;
    }
  }
}

/** Recording schedule mirroring the service protocol: a countdown before
 * each shot, a fixed recording span per shot. Returns the wall-clock
 * offsets (ms) of each shot's recording start. */
export function shotSchedule(shots: number, countdownS = 3.0,
                             recordS = 1.3, gapS = 1.2): number[] {
  const starts: number[] = [];
  let cursor = countdownS * 1000;
  for (let k = 0; k < shots; k++) {
    starts.push(cursor);
    cursor += recordS * 1000 + gapS * 1000 + (k < shots - 1 ? 0 : 0);
  }
  return starts;
}
