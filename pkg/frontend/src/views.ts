// Screen renderers: pure functions UiState -> HTML string, one per
// screen, snapshot-tested without a DOM.

import type {UiState} from "./state.js";

function esc(s: unknown): string {
  return String(s).replace(/[&<>"]/g, (c) =>
    ({"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;"}[c] as string));
}

function pct(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

export function renderHome(state: UiState): string {
  const gestures = state.session?.gestures ?? [];
  const items = gestures.length
    ? gestures.map((g) =>
        `<li class="gesture">${esc(g)} ` +
        `<button data-action="delete" data-gesture="${esc(g)}">remove</button></li>`
      ).join("")
    : `<li class="empty">No custom gestures yet</li>`;
  return `
<section class="screen home">
  <h1>Gesture Studio</h1>
  <ul class="registry">${items}</ul>
  <button data-action="live">Live recognition</button>
  <button data-action="add">Add a gesture</button>
</section>`;
}

export function renderLive(state: UiState): string {
  const events = state.recentEvents.map((e) =>
    `<li>${esc(e.label)} <span class="conf">${pct(e.confidence)}</span>` +
    ` <span class="src">${esc(e.source)}</span></li>`).join("");
  const banner = state.connection === "reconnecting"
    ? `<div class="banner reconnect">Connection lost; reconnecting...</div>`
    : "";
  return `
<section class="screen live">
  ${banner}
  <div class="ticker ${state.liveLabel === "Negative" ? "quiet" : "active"}">
    <span class="label">${esc(state.liveLabel)}</span>
    <span class="conf">${pct(state.liveConfidence)}</span>
  </div>
  <ol class="events">${events}</ol>
  <button data-action="home">Back</button>
</section>`;
}

export function renderCountdown(state: UiState): string {
  const shots = state.session?.shots_expected ?? 3;
  return `
<section class="screen countdown">
  <h2>Shot ${state.shotIndex + 1} of ${shots}</h2>
  <div class="count">${Math.ceil(state.countdownLeft)}</div>
  <p>Get ready...</p>
</section>`;
}

export function renderRecording(state: UiState): string {
  const shots = state.session?.shots_expected ?? 3;
  return `
<section class="screen recording">
  <h2>Shot ${state.shotIndex + 1} of ${shots}</h2>
  <div class="record-dot">REC</div>
  <p>Perform the gesture now</p>
</section>`;
}

export function renderAnalyzing(): string {
  return `
<section class="screen analyzing">
  <div class="spinner"></div>
  <p>Analyzing your recording...</p>
</section>`;
}

export function renderTooSimilar(state: UiState): string {
  const label = esc(state.verdict?.detail?.label ?? "an existing gesture");
  return `
<section class="screen verdict too-similar">
  <h2>Too similar to existing gestures</h2>
  <p>This movement looks like <strong>${label}</strong>, which the watch
  already recognizes. Please define a different gesture.</p>
  <button data-action="retry">Try another gesture</button>
</section>`;
}

export function renderInconsistent(state: UiState): string {
  const kept = Number(state.verdict?.detail?.kept ?? 0);
  const expected = Number(state.verdict?.detail?.expected ?? 3);
  return `
<section class="screen verdict inconsistent">
  <h2>Too inconsistent</h2>
  <p>Only ${kept} of ${expected} repetitions matched each other. Try to
  perform the gesture the same way each time.</p>
  <button data-action="retry">Record again</button>
</section>`;
}

export function renderDailyActivity(): string {
  return `
<section class="screen verdict daily-activity">
  <h2>Too close to daily activities</h2>
  <p>This movement resembles everyday motion (like scratching or tapping),
  so it would trigger accidentally. Please pick a more distinctive
  gesture.</p>
  <button data-action="retry">Try another gesture</button>
</section>`;
}

export function renderTraining(state: UiState): string {
  return `
<section class="screen training">
  <div class="spinner"></div>
  <p>Training the model for <strong>${esc(state.session?.gesture ?? "")}
  </strong>...</p>
</section>`;
}

export function renderGate(state: UiState): string {
  const acc = state.gateAccuracy ?? 0;
  return `
<section class="screen gate">
  <h2>Model trained with fair confidence</h2>
  <div class="accuracy">${pct(acc)}</div>
  <p>You can keep it as is, or record a few more shots to improve it.</p>
  <button data-action="good-enough">Good enough</button>
  <button data-action="more-shots">More shots</button>
</section>`;
}

export function renderCompleted(state: UiState): string {
  return `
<section class="screen completed">
  <h2>Gesture added</h2>
  <p><strong>${esc(state.session?.gesture ?? "")}</strong> is ready to use
  ${state.gateAccuracy != null ? `(accuracy ${pct(state.gateAccuracy)})` : ""}.
  </p>
  <button data-action="live">Try it live</button>
  <button data-action="home">Done</button>
</section>`;
}

export function renderRejected(state: UiState): string {
  return `
<section class="screen rejected">
  <h2>Please define a new gesture</h2>
  <p>The model still scored ${pct(state.gateAccuracy ?? 0)} after more
  shots. This movement is hard to recognize reliably; a more distinct
  gesture will work better.</p>
  <button data-action="retry">Start over</button>
</section>`;
}

export function render(state: UiState): string {
  const body = (() => {
    switch (state.screen) {
      case "home": return renderHome(state);
      case "live": return renderLive(state);
      case "wizard_countdown": return renderCountdown(state);
      case "wizard_recording": return renderRecording(state);
      case "analyzing": return renderAnalyzing();
      case "verdict_too_similar": return renderTooSimilar(state);
      case "verdict_inconsistent": return renderInconsistent(state);
      case "verdict_daily_activity": return renderDailyActivity();
      case "training": return renderTraining(state);
      case "gate": return renderGate(state);
      case "completed": return renderCompleted(state);
      case "rejected": return renderRejected(state);
    }
  })();
  const err = state.error
    ? `<div class="banner error">${esc(state.error)}</div>` : "";
  return err + body;
}
