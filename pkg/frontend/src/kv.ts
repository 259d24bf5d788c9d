/** Line-oriented key=value bodies shared with the annotation service. */

export type KvRecord = Record<string, string | string[]>;

export function parseKv(text: string): KvRecord {
  const out: KvRecord = {};
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`malformed line: ${line}`);
    const key = line.slice(0, eq);
    const value = line.slice(eq + 1);
    const prior = out[key];
    if (prior === undefined) {
      out[key] = value;
    } else if (Array.isArray(prior)) {
      prior.push(value);
    } else {
      out[key] = [prior, value];
    }
  }
  return out;
}

export function formatKv(pairs: Array<[string, string | number]>): string {
  return pairs.map(([key, value]) => `${key}=${value}\n`).join("");
}

/** Repeated keys parse to arrays, single occurrences to strings. */
export function asList(value: string | string[] | undefined): string[] {
  if (value === undefined) return [];
  return Array.isArray(value) ? value : [value];
}

export function one(record: KvRecord, key: string): string {
  const value = record[key];
  if (value === undefined || Array.isArray(value)) {
    throw new Error(`expected exactly one ${key}`);
  }
  return value;
}
