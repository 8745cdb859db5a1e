// UI session store: a reducer over service responses and stream events.
// The UI never infers anything client-side; every phase change mirrors
// the server state included in each response.

import type {GestureEvent, SessionState, VerdictInfo,
             WindowPrediction} from "./api.js";

export type Screen =
  | "home"
  | "live"
  | "wizard_countdown"
  | "wizard_recording"
  | "analyzing"
  | "verdict_too_similar"
  | "verdict_inconsistent"
  | "verdict_daily_activity"
  | "training"
  | "gate"
  | "completed"
  | "rejected";

export interface UiState {
  screen: Screen;
  session: SessionState | null;
  verdict: VerdictInfo | null;
  gateAccuracy: number | null;
  liveLabel: string;
  liveConfidence: number;
  recentEvents: GestureEvent[];
  shotIndex: number;      // wizard progress, 0-based
  countdownLeft: number;  // seconds remaining in current countdown
  connection: "connected" | "reconnecting" | "idle";
  error: string | null;
}

export function initialState(): UiState {
  return {
    screen: "home",
    session: null,
    verdict: null,
    gateAccuracy: null,
    liveLabel: "Negative",
    liveConfidence: 0,
    recentEvents: [],
    shotIndex: 0,
    countdownLeft: 0,
    connection: "idle",
    error: null,
  };
}

export type Action =
  | {type: "session"; state: SessionState}
  | {type: "verdict"; verdict: VerdictInfo; state: SessionState}
  | {type: "prediction"; prediction: WindowPrediction}
  | {type: "event"; event: GestureEvent}
  | {type: "wizard_started"; shots: number}
  | {type: "countdown_tick"; left: number}
  | {type: "shot_started"; index: number}
  | {type: "submitting"}
  | {type: "connection"; status: UiState["connection"]}
  | {type: "error"; message: string}
  | {type: "go_home"}
  | {type: "go_live"};

const VERDICT_SCREENS: Record<string, Screen> = {
  too_similar: "verdict_too_similar",
  inconsistent: "verdict_inconsistent",
  daily_activity: "verdict_daily_activity",
};

function screenForPhase(phase: string, fallback: Screen): Screen {
  switch (phase) {
    case "training": return "training";
    case "gate_shown": return "gate";
    case "completed": return "completed";
    case "rejected": return "rejected";
    case "more_shots_recording": return "wizard_countdown";
    case "analyzing": return "analyzing";
    default: return fallback;
  }
}

export function reduce(state: UiState, action: Action): UiState {
  switch (action.type) {
    case "session": {
      const screen = screenForPhase(action.state.phase, state.screen);
      return {...state, session: action.state, screen,
              gateAccuracy: action.state.gate_accuracy ?? state.gateAccuracy};
    }
    case "verdict": {
      const kind = action.verdict.kind;
      const screen = kind === "pass"
        ? screenForPhase(action.state.phase, "training")
        : VERDICT_SCREENS[kind] ?? state.screen;
      return {...state, verdict: action.verdict, session: action.state,
              gateAccuracy: action.state.gate_accuracy ?? null, screen};
    }
    case "prediction":
      return {...state, liveLabel: action.prediction.label,
              liveConfidence: action.prediction.confidence};
    case "event":
      return {...state,
              recentEvents: [action.event, ...state.recentEvents].slice(0, 8)};
    case "wizard_started":
      return {...state, screen: "wizard_countdown", shotIndex: 0,
              verdict: null, error: null};
    case "countdown_tick":
      return {...state, countdownLeft: action.left};
    case "shot_started":
      return {...state, screen: "wizard_recording", shotIndex: action.index};
    case "submitting":
      return {...state, screen: "analyzing"};
    case "connection":
      return {...state, connection: action.status};
    case "error":
      return {...state, error: action.message};
    case "go_home":
      return {...state, screen: "home", verdict: null, error: null};
    case "go_live":
      return {...state, screen: "live"};
  }
}

export class Store {
  private state = initialState();
  private listeners: Array<(s: UiState) => void> = [];

  get(): UiState {
    return this.state;
  }

  dispatch(action: Action): UiState {
    this.state = reduce(this.state, action);
    for (const fn of this.listeners) fn(this.state);
    return this.state;
  }

  subscribe(fn: (s: UiState) => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }
}
