import { writeFileSync } from "node:fs";
import { basename } from "node:path";
import { readCsv, requireColumns, Row, Table } from "./csv.js";
import { FigureInput, FigureSpec } from "./spec.js";
import { Axes, PALETTE, Point, renderSvg, Series } from "./svg.js";

function labelFor(input: FigureInput): string {
  return input.label ?? basename(input.path).replace(/\.[^.]*$/, "");
}

function finitePoints(
  rows: Row[],
  x: (row: Row) => number,
  y: (row: Row) => number,
  spec: FigureSpec,
): Point[] {
  const pts: Point[] = [];
  for (const row of rows) {
    const px = x(row);
    const py = y(row);
    if (!Number.isFinite(px) || !Number.isFinite(py)) continue;
    if (spec.log_x && px <= 0) continue;
    if (spec.log_y && py <= 0) continue;
    pts.push({ x: px, y: py });
  }
  return pts;
}

function seriesOrThrow(input: FigureInput, column: string, points: Point[]): void {
  if (points.length === 0) {
    throw new Error(`${input.path}: no plottable "${column}" values`);
  }
}

function costColumn(spec: FigureSpec): { label: string; value: (row: Row) => number } {
  if (spec.x === "uplink") {
    return { label: "cumulative floats (uplink)", value: (r) => r.uplink_floats_cum };
  }
  if (spec.x === "downlink") {
    return { label: "cumulative floats (downlink)", value: (r) => r.downlink_floats_cum };
  }
  return {
    label: "cumulative floats (total)",
    value: (r) => r.uplink_floats_cum + r.downlink_floats_cum,
  };
}

function traceTables(spec: FigureSpec, needed: string[]): Table[] {
  return spec.inputs.map((input) => {
    const table = readCsv(input.path);
    requireColumns(input.path, table, needed);
    return table;
  });
}

function buildSeries(spec: FigureSpec): { axes: Axes; series: Series[] } {
  if (spec.kind === "convergence") {
    const tables = traceTables(spec, ["round", "kl_proxy"]);
    const series = spec.inputs.map((input, i) => {
      const pts = finitePoints(tables[i].rows, (r) => r.round, (r) => r.kl_proxy, spec);
      seriesOrThrow(input, "kl_proxy", pts);
      return { label: labelFor(input), points: pts, color: PALETTE[i % PALETTE.length] };
    });
    return {
      axes: {
        title: "Convergence of the KL proxy",
        xLabel: "round",
        yLabel: "KL divergence proxy",
        logX: spec.log_x,
        logY: spec.log_y,
      },
      series,
    };
  }

  if (spec.kind === "cost") {
    const xcol = costColumn(spec);
    const needed =
      spec.x === "total"
        ? ["kl_proxy", "uplink_floats_cum", "downlink_floats_cum"]
        : ["kl_proxy", `${spec.x}_floats_cum`];
    const tables = traceTables(spec, needed);
    const series = spec.inputs.map((input, i) => {
      const pts = finitePoints(tables[i].rows, xcol.value, (r) => r.kl_proxy, spec);
      seriesOrThrow(input, "kl_proxy", pts);
      return { label: labelFor(input), points: pts, color: PALETTE[i % PALETTE.length] };
    });
    return {
      axes: {
        title: "KL proxy vs communication cost",
        xLabel: xcol.label,
        yLabel: "KL divergence proxy",
        logX: spec.log_x,
        logY: spec.log_y,
      },
      series,
    };
  }

  if (spec.kind === "bias_vs_gamma") {
    const tables = traceTables(spec, ["gamma", "plateau_kl"]);
    const series = spec.inputs.map((input, i) => {
      const rows = [...tables[i].rows].sort((a, b) => a.gamma - b.gamma);
      const pts = finitePoints(rows, (r) => r.gamma, (r) => r.plateau_kl, spec);
      seriesOrThrow(input, "plateau_kl", pts);
      return {
        label: labelFor(input),
        points: pts,
        color: PALETTE[i % PALETTE.length],
        markers: true,
      };
    });
    return {
      axes: {
        title: "Plateau level vs step size",
        xLabel: "step size gamma",
        yLabel: "plateau KL proxy",
        logX: spec.log_x,
        logY: spec.log_y,
      },
      series,
    };
  }

  // bound_overlay: measured proxy solid, theory bound dashed in the same color;
  // the bound series keeps only rounds where the constants were admissible
  const tables = traceTables(spec, ["round", "kl_proxy", "theory_bound"]);
  const series: Series[] = [];
  spec.inputs.forEach((input, i) => {
    const color = PALETTE[i % PALETTE.length];
    const measured = finitePoints(tables[i].rows, (r) => r.round, (r) => r.kl_proxy, spec);
    seriesOrThrow(input, "kl_proxy", measured);
    series.push({ label: labelFor(input), points: measured, color });
    const bound = finitePoints(tables[i].rows, (r) => r.round, (r) => r.theory_bound, spec);
    if (bound.length > 0) {
      series.push({ label: `${labelFor(input)} bound`, points: bound, color, dashed: true });
    }
  });
  return {
    axes: {
      title: "Measured KL proxy vs theory bound",
      xLabel: "round",
      yLabel: "KL divergence proxy",
      logX: spec.log_x,
      logY: spec.log_y,
    },
    series,
  };
}

export function render(spec: FigureSpec): string {
  const { axes, series } = buildSeries(spec);
  const svg = renderSvg(axes, series);
  writeFileSync(spec.output, svg);
  return svg;
}
