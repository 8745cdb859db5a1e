// Typed REST client for the gesture service (docs/formats.md).

export interface VerdictInfo {
  kind: "too_similar" | "inconsistent" | "daily_activity" | "pass";
  detail: Record<string, unknown>;
}

export interface SessionState {
  phase: string;
  gesture: string;
  shots_expected: number;
  attempt: number;
  gestures: string[];
  last_verdict?: VerdictInfo;
  gate_accuracy?: number;
}

export interface GestureEvent {
  label: string;
  onset_s: number;
  emit_s: number;
  confidence: number;
  source: string;
}

export interface WindowPrediction {
  t: number;
  label: string;
  confidence: number;
  source: string;
}

export interface StreamMessage {
  predictions?: WindowPrediction[];
  events?: GestureEvent[];
  error?: string;
}

export type Frame = [number, number, number, number, number, number];

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string,
              private fetchFn: typeof fetch = fetch) {}

  private async request<T>(method: string, path: string,
                           body?: unknown): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : {"Content-Type": "application/json"},
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    if (!res.ok) {
      let detail = text;
      try {
        detail = JSON.parse(text).detail ?? text;
      } catch { /* plain text error */ }
      throw new ServiceError(res.status, String(detail));
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<{status: string; gestures: string[]}> {
    return this.request("GET", "/healthz");
  }

  state(): Promise<SessionState> {
    return this.request("GET", "/session/state");
  }

  startRecording(gesture: string, shots = 3):
      Promise<{reference_times: number[]; state: SessionState}> {
    return this.request("POST", "/session/start-recording", {gesture, shots});
  }

  submitRecording(frames: Frame[], referenceTimes?: number[]):
      Promise<{verdict: VerdictInfo; state: SessionState}> {
    return this.request("POST", "/session/submit-recording", {
      frames, sample_rate: 100.0, reference_times: referenceTimes,
    });
  }

  gateDecision(choice: "good_enough" | "more_shots"):
      Promise<{state: SessionState}> {
    return this.request("POST", "/session/gate-decision", {choice});
  }

  resetSession(): Promise<{state: SessionState}> {
    return this.request("POST", "/session/reset");
  }

  gestures(): Promise<{base: string[]; custom: Array<{name: string}>}> {
    return this.request("GET", "/gestures");
  }

  deleteGesture(name: string): Promise<{state: SessionState}> {
    return this.request("DELETE", `/gestures/${encodeURIComponent(name)}`);
  }
}
