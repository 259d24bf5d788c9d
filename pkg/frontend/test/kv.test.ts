import { describe, expect, it } from "vitest";

import { asList, formatKv, one, parseKv } from "../src/kv.js";

describe("parseKv", () => {
  it("parses simple lines", () => {
    expect(parseKv("a=1\nb=two\n")).toEqual({ a: "1", b: "two" });
  });

  it("collects repeated keys into arrays in order", () => {
    const record = parseKv("sample=g1\nsample=g2\nsample=g3\n");
    expect(record["sample"]).toEqual(["g1", "g2", "g3"]);
  });

  it("keeps equals signs inside values", () => {
    expect(parseKv("expr=a=b")).toEqual({ expr: "a=b" });
  });

  it("skips blank lines", () => {
    expect(parseKv("\na=1\n\n")).toEqual({ a: "1" });
  });

  it("throws on a line without equals", () => {
    expect(() => parseKv("nonsense")).toThrow(/malformed/);
  });

  it("round-trips through formatKv", () => {
    const text = formatKv([
      ["labeler", "anna"],
      ["trials", 3],
    ]);
    expect(text).toBe("labeler=anna\ntrials=3\n");
    expect(parseKv(text)).toEqual({ labeler: "anna", trials: "3" });
  });
});

describe("kv helpers", () => {
  it("asList normalizes scalars, arrays, and absence", () => {
    expect(asList(undefined)).toEqual([]);
    expect(asList("x")).toEqual(["x"]);
    expect(asList(["x", "y"])).toEqual(["x", "y"]);
  });

  it("one rejects missing and repeated keys", () => {
    expect(one({ a: "1" }, "a")).toBe("1");
    expect(() => one({}, "a")).toThrow(/exactly one/);
    expect(() => one({ a: ["1", "2"] }, "a")).toThrow(/exactly one/);
  });
});
