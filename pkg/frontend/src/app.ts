/** Single-page labeling flow: one active session, the server is truth.

Every mutation round-trips through the service and the view re-renders
from the server's session state, so the trial counter and marks can
never drift from what the store recorded.
*/

import { ServiceClient, ServiceError, SessionView } from "./api.js";
import { moveCursor, thumbStates } from "./session.js";

export class App {
  private view: SessionView | null = null;
  private cursor = 0;
  private pending: Promise<void> = Promise.resolve();

  /** Wired by the host page to advance to the next part after a close. */
  onNext: (() => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ServiceClient,
    readonly labeler: string,
  ) {}

  get session(): SessionView | null {
    return this.view;
  }

  /** Resolves once queued interactions have rendered. */
  settled(): Promise<void> {
    return this.pending;
  }

  async start(image: string, part: string): Promise<void> {
    await this.run(
      async () => {
        this.view = await this.client.createSession(this.labeler, image, part);
        this.cursor = 0;
        this.render();
      },
      () => void this.start(image, part),
    );
  }

  /** Reopen an existing session; prior wrong marks come back from the server. */
  async resume(sessionId: number): Promise<void> {
    let view: SessionView;
    try {
      view = await this.client.getSession(sessionId);
    } catch (error) {
      if (error instanceof ServiceError && error.status === 404) throw error;
      this.renderBanner(describe(error), () => void this.resume(sessionId));
      return;
    }
    this.view = view;
    this.cursor = 0;
    this.render();
  }

  /** Record a pick; no-op on closed sessions and already-marked thumbs. */
  async choose(index: number): Promise<void> {
    await this.run(
      async () => {
        const view = this.view;
        if (!view || view.closed) return;
        const chosen = view.sample[index];
        if (chosen === undefined || view.wrong.includes(chosen)) return;
        await this.client.recordTrial(view.session, chosen);
        this.view = await this.client.getSession(view.session);
        this.cursor = index;
        this.render();
      },
      () => void this.choose(index),
    );
  }

  handleKey(key: string): void {
    const view = this.view;
    if (!view) return;
    if (key === "Enter") {
      void this.choose(this.cursor);
      return;
    }
    const next = moveCursor(this.cursor, key, view.sample.length);
    if (next !== this.cursor) {
      this.cursor = next;
      this.render();
    }
  }

  /** Serialize interactions; a failure keeps the view and offers a retry. */
  private async run(
    action: () => Promise<void>,
    retry: () => void,
  ): Promise<void> {
    const job = this.pending.then(async () => {
      try {
        await action();
      } catch (error) {
        this.renderBanner(describe(error), retry);
      }
    });
    this.pending = job;
    await job;
  }

  private render(): void {
    const view = this.view;
    if (!view) return;
    const states = thumbStates(view);

    const status = el("div", "status");
    status.textContent = `${view.image} / ${view.part} — trials ${view.trials}`;

    const query = el("img", "query");
    query.setAttribute("src", this.client.maskedQueryUrl(view.session));
    query.setAttribute("alt", "masked query part");

    const grid = el("div", "grid");
    view.sample.forEach((imageId, index) => {
      const cell = el("button", `thumb ${states[index]}`);
      cell.dataset.image = imageId;
      if (index === this.cursor) cell.classList.add("focus");
      const img = el("img");
      img.setAttribute("loading", "lazy");
      img.setAttribute("src", this.client.galleryImageUrl(imageId));
      img.setAttribute("alt", `gallery ${index + 1}`);
      cell.appendChild(img);
      cell.addEventListener("click", () => void this.choose(index));
      grid.appendChild(cell);
    });

    const children: HTMLElement[] = [status, query, grid];
    if (view.closed) {
      const done = el("div", "done");
      done.textContent = `found in ${view.trials} ${view.trials === 1 ? "trial" : "trials"}`;
      children.push(done);
      if (this.onNext) {
        const next = el("button", "next");
        next.textContent = "next part";
        next.addEventListener("click", () => this.onNext?.());
        children.push(next);
      }
    }
    this.root.replaceChildren(...children);
  }

  private renderBanner(message: string, retry: () => void): void {
    const banner = el("div", "banner");
    const text = el("span");
    text.textContent = `service error: ${message}`;
    const button = el("button", "retry");
    button.textContent = "retry";
    button.addEventListener("click", () => {
      banner.remove();
      retry();
    });
    banner.append(text, button);
    // the current view stays rendered; the banner sits on top
    this.root.prepend(banner);
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

function describe(error: unknown): string {
  if (error instanceof ServiceError) return `${error.status} ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
