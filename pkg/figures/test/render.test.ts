import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { main } from "../src/cli.js";
import { readCsv } from "../src/csv.js";
import { render } from "../src/render.js";
import { loadSpec } from "../src/spec.js";

const here = dirname(fileURLToPath(import.meta.url));
const data = (name: string) => join(here, "testdata", name);
const ALGS = ["lmc", "delf", "pelf", "belf"];

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "figures-"));
}

function specFile(dir: string, spec: object): string {
  const path = join(dir, "spec.json");
  writeFileSync(path, JSON.stringify(spec));
  return path;
}

function traceInputs() {
  return ALGS.map((a) => ({ path: data(`trace_${a}.csv`), label: a }));
}

describe("render", () => {
  it("renders a convergence figure for each algorithm trace", () => {
    const dir = tmp();
    const out = join(dir, "convergence.svg");
    const svg = render(loadSpec(specFile(dir, {
      kind: "convergence",
      inputs: traceInputs(),
      output: out,
    })));
    expect(svg.startsWith("<svg")).toBe(true);
    expect(readFileSync(out, "utf8")).toBe(svg);
    for (const a of ALGS) expect(svg).toContain(`>${a}</text>`);
  });

  it("renders a communication cost figure", () => {
    const dir = tmp();
    const out = join(dir, "cost.svg");
    const svg = render(loadSpec(specFile(dir, {
      kind: "cost",
      inputs: [
        { path: data("trace_delf.csv"), label: "delf" },
        { path: data("trace_belf.csv"), label: "belf" },
      ],
      output: out,
    })));
    expect(svg).toContain("cumulative floats (total)");
    expect(existsSync(out)).toBe(true);
  });

  it("cost x axis can restrict to one direction", () => {
    const dir = tmp();
    const base = {
      kind: "cost",
      inputs: [{ path: data("trace_belf.csv"), label: "belf" }],
    };
    const up = render(loadSpec(specFile(dir, {
      ...base, output: join(dir, "up.svg"), x: "uplink",
    })));
    const total = render(loadSpec(specFile(dir, {
      ...base, output: join(dir, "total.svg"),
    })));
    expect(up).toContain("cumulative floats (uplink)");
    expect(up).not.toBe(total);
  });

  it("renders the plateau vs step size figure from a sweep", () => {
    const dir = tmp();
    const out = join(dir, "bias.svg");
    const svg = render(loadSpec(specFile(dir, {
      kind: "bias_vs_gamma",
      inputs: [{ path: data("sweep.csv"), label: "lmc sweep" }],
      output: out,
      log_x: true,
    })));
    expect(svg).toContain("step size gamma");
    expect(svg).toContain("<circle");
  });

  it("sweep plateau is monotone in the step size", () => {
    const rows = [...readCsv(data("sweep.csv")).rows].sort((a, b) => a.gamma - b.gamma);
    expect(rows.length).toBeGreaterThanOrEqual(3);
    for (let i = 0; i + 1 < rows.length; i++) {
      expect(rows[i].plateau_kl).toBeLessThan(rows[i + 1].plateau_kl);
    }
  });

  it("renders the bound overlay with a dashed bound series per trace", () => {
    const dir = tmp();
    const out = join(dir, "overlay.svg");
    const svg = render(loadSpec(specFile(dir, {
      kind: "bound_overlay",
      inputs: traceInputs(),
      output: out,
    })));
    for (const a of ALGS) expect(svg).toContain(`>${a} bound</text>`);
    expect(svg).toContain('stroke-dasharray="6 4"');
  });

  it("bound overlay data keeps theory_bound above the measured kl", () => {
    for (const a of ALGS) {
      const rows = readCsv(data(`trace_${a}.csv`)).rows;
      let checked = 0;
      for (const r of rows) {
        if (!Number.isFinite(r.kl_proxy) || !Number.isFinite(r.theory_bound)) continue;
        expect(r.theory_bound).toBeGreaterThanOrEqual(r.kl_proxy);
        checked++;
      }
      expect(checked).toBeGreaterThan(0);
    }
  });

  it("is deterministic for a fixed spec and inputs", () => {
    const dir = tmp();
    const spec = {
      kind: "bound_overlay",
      inputs: traceInputs(),
    };
    const a = render(loadSpec(specFile(dir, { ...spec, output: join(dir, "a.svg") })));
    const b = render(loadSpec(specFile(dir, { ...spec, output: join(dir, "b.svg") })));
    expect(a).toBe(b);
    expect(readFileSync(join(dir, "a.svg"))).toEqual(readFileSync(join(dir, "b.svg")));
  });

  it("names the missing column", () => {
    const dir = tmp();
    const lines = readFileSync(data("trace_delf.csv"), "utf8").trim().split("\n");
    const dropped = lines
      .map((line) => line.split(",").filter((_, i) => i !== 1).join(","))
      .join("\n");
    const path = join(dir, "broken.csv");
    writeFileSync(path, dropped + "\n");
    const spec = loadSpec(specFile(dir, {
      kind: "convergence",
      inputs: [{ path }],
      output: join(dir, "out.svg"),
    }));
    expect(() => render(spec)).toThrow('missing column "kl_proxy"');
  });

  it("rejects a series with no plottable values", () => {
    const dir = tmp();
    const header = readFileSync(data("trace_lmc.csv"), "utf8").split("\n")[0];
    const path = join(dir, "empty.csv");
    writeFileSync(path, header + "\n0,nan,nan,nan,nan,nan,nan,0,0,nan\n");
    const spec = loadSpec(specFile(dir, {
      kind: "convergence",
      inputs: [{ path }],
      output: join(dir, "out.svg"),
    }));
    expect(() => render(spec)).toThrow('no plottable "kl_proxy" values');
  });

  it("requires at least one input", () => {
    const dir = tmp();
    const path = specFile(dir, {
      kind: "convergence",
      inputs: [],
      output: join(dir, "out.svg"),
    });
    expect(() => loadSpec(path)).toThrow("at least one input CSV");
  });
});

describe("cli", () => {
  it("renders through the command line and reports the output path", () => {
    const dir = tmp();
    const out = join(dir, "fig.svg");
    const code = main(["render", "--spec", specFile(dir, {
      kind: "convergence",
      inputs: [{ path: data("trace_lmc.csv"), label: "lmc" }],
      output: out,
    })]);
    expect(code).toBe(0);
    expect(existsSync(out)).toBe(true);
  });

  it("exits 2 on a missing or invalid spec", () => {
    const dir = tmp();
    expect(main(["render", "--spec", join(dir, "nope.json")])).toBe(2);
    writeFileSync(join(dir, "bad.json"), "{");
    expect(main(["render", "--spec", join(dir, "bad.json")])).toBe(2);
    expect(main(["render"])).toBe(2);
    expect(main(["plot", "--spec", "x.json"])).toBe(2);
  });

  it("exits 1 when the CSV schema does not match", () => {
    const dir = tmp();
    const path = join(dir, "wrong.csv");
    writeFileSync(path, "a,b\n1,2\n");
    const code = main(["render", "--spec", specFile(dir, {
      kind: "bound_overlay",
      inputs: [{ path }],
      output: join(dir, "out.svg"),
    })]);
    expect(code).toBe(1);
  });
});
