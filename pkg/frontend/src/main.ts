/** Boot: read service URL and labeler from the query string, run the flow.

One active session per tab; the open session id lives in sessionStorage
so a reload resumes it with its wrong marks restored.
*/

import { ServiceClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const serviceUrl = params.get("service") ?? "http://127.0.0.1:8008";
const labeler = params.get("labeler") ?? "anonymous";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

const client = new ServiceClient(serviceUrl);
const app = new App(root, client, labeler);

function storedPartIndex(): number {
  return Number(sessionStorage.getItem("partIndex") ?? "0");
}

async function openPart(index: number): Promise<void> {
  const parts = await client.listParts();
  if (parts.length === 0) {
    root!.textContent = "no parts to annotate";
    return;
  }
  const part = parts[index % parts.length];
  await app.start(part.image, part.part);
  const session = app.session;
  if (session && !session.closed) {
    sessionStorage.setItem("openSession", String(session.session));
  }
}

app.onNext = () => {
  const next = storedPartIndex() + 1;
  sessionStorage.setItem("partIndex", String(next));
  sessionStorage.removeItem("openSession");
  void openPart(next);
};

window.addEventListener("keydown", (event) => {
  if (["ArrowLeft", "ArrowRight", "ArrowUp", "ArrowDown", "Enter"].includes(event.key)) {
    event.preventDefault();
    app.handleKey(event.key);
  }
});

async function boot(): Promise<void> {
  const stored = sessionStorage.getItem("openSession");
  if (stored) {
    try {
      await app.resume(Number(stored));
      return;
    } catch {
      sessionStorage.removeItem("openSession"); // session gone, start fresh
    }
  }
  await openPart(storedPartIndex());
}

void boot();
