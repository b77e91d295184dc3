/** DOM wiring for the blind-survey rater app (no framework). */

import { ApiClient, Judgment } from "./api.js";
import { SurveySession } from "./session.js";
import { PRESET_NAMES, PRESETS } from "./windowing.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderStartForm(root: HTMLElement): void {
  root.replaceChildren();
  const form = el("form", { class: "start" });
  form.append(el("h1", {}, "Blind survey"));
  form.append(el("p", {}, "Enter the survey id and your rater id to begin."));
  const survey = el("input", { placeholder: "survey id", required: "true" });
  const rater = el("input", { placeholder: "rater id", required: "true" });
  const go = el("button", { type: "submit" }, "Begin");
  form.append(survey, rater, go);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const params = new URLSearchParams(window.location.search);
    params.set("survey", survey.value.trim());
    params.set("rater", rater.value.trim());
    window.location.search = params.toString();
  });
  root.append(form);
}

function renderComplete(root: HTMLElement, session: SurveySession): void {
  root.replaceChildren();
  const counts = session.counts();
  const box = el("div", { class: "complete" });
  box.append(el("h1", {}, "Survey complete, thank you"));
  box.append(
    el(
      "p",
      {},
      `Your answers: ${counts.real} real, ${counts.synthetic} synthetic, ` +
        `${counts.indeterminable} indeterminable.`,
    ),
  );
  box.append(el("p", {}, "Your responses are recorded; results stay blind."));
  root.append(box);
}

async function showImage(img: HTMLImageElement, session: SurveySession): Promise<void> {
  const blob = await session.fetchImage();
  const url = URL.createObjectURL(blob);
  const old = img.src;
  img.src = url;
  if (old.startsWith("blob:")) URL.revokeObjectURL(old);
}

function renderItem(root: HTMLElement, session: SurveySession): void {
  if (session.complete) {
    renderComplete(root, session);
    return;
  }
  root.replaceChildren();

  const header = el("div", { class: "header" });
  header.append(el("span", {}, `Scan ${session.done + 1} of ${session.total}`));
  const status = el("span", { class: "status" });
  header.append(status);

  const img = el("img", { class: "scan", alt: "axial CT slice" });
  void showImage(img, session).catch(() => {
    status.textContent = "image failed to load; adjust window to retry";
  });

  const controls = el("div", { class: "window-controls" });
  const windowLabel = el("span", { class: "wl" });
  const syncLabel = () => {
    const w = session.window;
    windowLabel.textContent = `wc ${w.wc} / ww ${w.ww}`;
  };
  syncLabel();
  for (const name of PRESET_NAMES) {
    const btn = el("button", { type: "button" }, name.replace("-", " "));
    btn.addEventListener("click", () => {
      session.applyPreset(name);
      syncLabel();
      wcSlider.value = String(PRESETS[name].wc);
      wwSlider.value = String(PRESETS[name].ww);
      void showImage(img, session);
    });
    controls.append(btn);
  }
  const wcSlider = el("input", {
    type: "range", min: "-1000", max: "1000", step: "10",
    value: String(session.window.wc), title: "window center",
  });
  const wwSlider = el("input", {
    type: "range", min: "1", max: "4000", step: "10",
    value: String(session.window.ww), title: "window width",
  });
  const onSlide = () => {
    session.setWindow(Number(wcSlider.value), Number(wwSlider.value));
    syncLabel();
    void showImage(img, session);
  };
  wcSlider.addEventListener("change", onSlide);
  wwSlider.addEventListener("change", onSlide);
  controls.append(wcSlider, wwSlider, windowLabel);

  const question = el("p", {}, "Do you think this scan is:");
  const choices = el("div", { class: "choices" });
  let selected: Judgment | null = null;
  const buttons = new Map<Judgment, HTMLButtonElement>();
  for (const judgment of ["real", "synthetic", "indeterminable"] as Judgment[]) {
    const btn = el("button", { type: "button", class: "choice" }, judgment);
    btn.addEventListener("click", () => {
      selected = judgment;
      for (const [j, b] of buttons) b.classList.toggle("selected", j === judgment);
      submit.disabled = false;
    });
    buttons.set(judgment, btn);
    choices.append(btn);
  }

  const rationale = el("textarea", {
    placeholder: "If possible, briefly state the reason for your answer (optional)",
    rows: "3",
  });

  const submit = el("button", { type: "button", class: "submit" }, "Submit and next");
  submit.disabled = true;
  submit.addEventListener("click", async () => {
    if (!selected) return;
    submit.disabled = true;
    status.textContent = "";
    try {
      const outcome = await session.submit(selected, rationale.value);
      if (outcome === "already-judged") {
        status.textContent = "already answered in a previous session; moving on";
      }
      renderItem(root, session);
    } catch {
      // keep rationale and selection; invite a retry
      submit.disabled = false;
      status.textContent = "submission failed, check the connection and retry";
    }
  });

  root.append(header, img, controls, question, choices, rationale, submit);
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const surveyId = params.get("survey");
  const raterId = params.get("rater");
  if (!surveyId || !raterId) {
    renderStartForm(root);
    return;
  }
  const api = new ApiClient(params.get("api") ?? "", params.get("token") ?? undefined);
  const session = new SurveySession(api, surveyId, raterId);
  try {
    await session.load();
  } catch (err) {
    root.replaceChildren(el("p", { class: "error" }, `cannot load survey: ${err}`));
    return;
  }
  renderItem(root, session);
}

void boot();
