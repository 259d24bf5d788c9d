/** Typed client over the annotation service HTTP interface. */

import { KvRecord, asList, formatKv, one, parseKv } from "./kv.js";

export interface SessionView {
  session: number;
  labeler: string;
  image: string;
  part: string;
  closed: boolean;
  trials: number;
  /** Gallery image ids in server order; never reshuffled client-side. */
  sample: string[];
  wrong: string[];
  /** The server reveals the answer only after the session closes. */
  revealed: string | null;
}

export interface TrialResult {
  correct: boolean;
  trials: number;
  closed: boolean;
}

export interface PartRef {
  image: string;
  part: string;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

function sessionFromRecord(record: KvRecord): SessionView {
  return {
    session: Number(one(record, "session")),
    labeler: one(record, "labeler"),
    image: one(record, "image"),
    part: one(record, "part"),
    closed: one(record, "closed") === "true",
    trials: Number(one(record, "trials")),
    sample: asList(record["sample"]),
    wrong: asList(record["wrong"]),
    revealed: typeof record["correct"] === "string" ? record["correct"] : null,
  };
}

export class ServiceClient {
  constructor(readonly baseUrl: string) {}

  private async request(path: string, init?: RequestInit): Promise<KvRecord> {
    const response = await fetch(this.baseUrl + path, init);
    const text = await response.text();
    if (!response.ok) {
      let message = text.trim();
      try {
        message = one(parseKv(text), "error");
      } catch {
        // non-kv error body, keep the raw text
      }
      throw new ServiceError(response.status, message);
    }
    return parseKv(text);
  }

  async createSession(
    labeler: string,
    image: string,
    part: string,
  ): Promise<SessionView> {
    const body = formatKv([
      ["labeler", labeler],
      ["image", image],
      ["part", part],
    ]);
    const record = await this.request("/sessions", { method: "POST", body });
    return sessionFromRecord(record);
  }

  async getSession(sessionId: number): Promise<SessionView> {
    return sessionFromRecord(await this.request(`/sessions/${sessionId}`));
  }

  async recordTrial(sessionId: number, chosen: string): Promise<TrialResult> {
    const record = await this.request(`/sessions/${sessionId}/trials`, {
      method: "POST",
      body: formatKv([["chosen", chosen]]),
    });
    return {
      correct: one(record, "correct") === "true",
      trials: Number(one(record, "trials")),
      closed: one(record, "closed") === "true",
    };
  }

  async listParts(): Promise<PartRef[]> {
    const record = await this.request("/parts");
    return asList(record["part"]).map((entry) => {
      const slash = entry.indexOf("/");
      if (slash < 0) throw new Error(`malformed part entry: ${entry}`);
      return { image: entry.slice(0, slash), part: entry.slice(slash + 1) };
    });
  }

  async partScore(
    image: string,
    part: string,
  ): Promise<{ score: number; labelers: number }> {
    const record = await this.request(`/parts/${image}/${part}/score`);
    return {
      score: Number(one(record, "score")),
      labelers: Number(one(record, "labelers")),
    };
  }

  maskedQueryUrl(sessionId: number): string {
    return `${this.baseUrl}/sessions/${sessionId}/image`;
  }

  galleryImageUrl(imageId: string): string {
    return `${this.baseUrl}/images/${imageId}`;
  }

  exportUrl(): string {
    return `${this.baseUrl}/export`;
  }
}
