// Recording wizard: countdown per shot, frame capture, submission.
// The frame source is pluggable (device motion, file replay, synthetic),
// so the wizard logic is testable end-to-end without hardware.

import type {ApiClient, Frame, VerdictInfo} from "./api.js";
import {Countdown, TimerApi, realTimers} from "./countdown.js";
import type {Store} from "./state.js";

export interface FrameSource {
  /** Starts delivering frames; returns a stop function. */
  start(push: (frames: Frame[]) => void): () => void;
}

export class Wizard {
  constructor(private api: ApiClient, private store: Store,
              private source: FrameSource,
              private timers: TimerApi = realTimers,
              private countdownS = 3.0, private recordS = 1.3) {}

  /** Runs the full shot-recording flow; resolves with the verdict. */
  async run(gesture: string, shots = 3): Promise<VerdictInfo> {
    const {reference_times, state} =
      await this.api.startRecording(gesture, shots);
    this.store.dispatch({type: "session", state});
    this.store.dispatch({type: "wizard_started", shots});

    const frames: Frame[] = [];
    const stop = this.source.start((batch) => frames.push(...batch));
    try {
      for (let k = 0; k < shots; k++) {
        this.store.dispatch({type: "shot_started", index: k});
        this.store.dispatch({type: "countdown_tick",
                             left: this.countdownS});
        await this.countdown(k);
        await this.recordSpan();
      }
    } finally {
      stop();
    }
    this.store.dispatch({type: "submitting"});
    const res = await this.api.submitRecording(frames, reference_times);
    this.store.dispatch({type: "verdict", verdict: res.verdict,
                         state: res.state});
    return res.verdict;
  }

  private countdown(shotIndex: number): Promise<void> {
    return new Promise((resolve) => {
      const cd = new Countdown(this.countdownS, {
        onTick: (left) => {
          this.store.dispatch({type: "countdown_tick", left});
          if (left === this.countdownS) {
            this.store.dispatch({type: "shot_started", index: shotIndex});
          }
        },
        onDone: resolve,
      }, this.timers);
      this.store.dispatch({type: "shot_started", index: shotIndex});
      cd.begin();
    });
  }

  private recordSpan(): Promise<void> {
    return new Promise((resolve) => {
      this.timers.setTimeout(resolve, this.recordS * 1000);
    });
  }
}
