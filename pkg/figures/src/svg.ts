export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  points: Point[];
  color: string;
  dashed?: boolean;
  markers?: boolean;
}

export interface Axes {
  title: string;
  xLabel: string;
  yLabel: string;
  logX: boolean;
  logY: boolean;
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 44, right: 176, bottom: 56, left: 80 };

function trim(v: number): string {
  return String(Number(v.toPrecision(10)));
}

function formatTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    const exp = Math.floor(Math.log10(a) + 1e-12);
    const mant = Number((v / Math.pow(10, exp)).toPrecision(3));
    return mant === 1 ? `1e${exp}` : mant === -1 ? `-1e${exp}` : `${trim(mant)}e${exp}`;
  }
  return trim(v);
}

function linearTicks(lo: number, hi: number): number[] {
  const step0 = (hi - lo) / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const norm = step0 / mag;
  const step = mag * (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10);
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const eLo = Math.ceil(Math.log10(lo) - 1e-12);
  const eHi = Math.floor(Math.log10(hi) + 1e-12);
  const decades: number[] = [];
  for (let e = eLo; e <= eHi; e++) decades.push(Math.pow(10, e));
  if (decades.length >= 2) return decades;
  const dense: number[] = [];
  for (let e = Math.floor(Math.log10(lo) - 1); e <= eHi + 1; e++) {
    for (const m of [1, 2, 5]) {
      const v = m * Math.pow(10, e);
      if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) dense.push(v);
    }
  }
  return dense.length >= 2 ? dense : [lo, hi];
}

function domainOf(values: number[], log: boolean): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (log) {
    if (lo === hi) return [lo / 3, hi * 3];
    const pad = Math.pow(hi / lo, 0.04);
    return [lo / pad, hi * pad];
  }
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  const pad = (hi - lo) * 0.04;
  return [lo - pad, hi + pad];
}

function scaler(dom: [number, number], range: [number, number], log: boolean) {
  const d0 = log ? Math.log10(dom[0]) : dom[0];
  const d1 = log ? Math.log10(dom[1]) : dom[1];
  return (v: number) => {
    const t = ((log ? Math.log10(v) : v) - d0) / (d1 - d0);
    return range[0] + t * (range[1] - range[0]);
  };
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/* Pure function of (axes, series): no timestamps, no randomness. */
export function renderSvg(axes: Axes, series: Series[]): string {
  if (series.length === 0) throw new Error("no series to plot");
  for (const s of series) {
    if (s.points.length === 0) throw new Error(`series "${s.label}" has no plottable points`);
  }

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const xDom = domainOf(series.flatMap((s) => s.points.map((p) => p.x)), axes.logX);
  const yDom = domainOf(series.flatMap((s) => s.points.map((p) => p.y)), axes.logY);
  const sx = scaler(xDom, [MARGIN.left, MARGIN.left + plotW], axes.logX);
  const sy = scaler(yDom, [MARGIN.top + plotH, MARGIN.top], axes.logY);
  const xTicks = axes.logX ? logTicks(xDom[0], xDom[1]) : linearTicks(xDom[0], xDom[1]);
  const yTicks = axes.logY ? logTicks(yDom[0], yDom[1]) : linearTicks(yDom[0], yDom[1]);

  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  out.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);

  for (const t of xTicks) {
    const x = sx(t).toFixed(2);
    out.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${MARGIN.top + plotH}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
    );
    out.push(
      `<text x="${x}" y="${MARGIN.top + plotH + 18}" font-size="11" ` +
        `text-anchor="middle" fill="#333333">${formatTick(t)}</text>`,
    );
  }
  for (const t of yTicks) {
    const y = sy(t).toFixed(2);
    out.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + plotW}" y2="${y}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
    );
    out.push(
      `<text x="${MARGIN.left - 8}" y="${y}" font-size="11" text-anchor="end" ` +
        `dominant-baseline="middle" fill="#333333">${formatTick(t)}</text>`,
    );
  }
  out.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#333333" stroke-width="1"/>`,
  );

  for (const s of series) {
    const coords = s.points
      .map((p) => `${sx(p.x).toFixed(2)},${sy(p.y).toFixed(2)}`)
      .join(" ");
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    out.push(
      `<polyline points="${coords}" fill="none" stroke="${s.color}" ` +
        `stroke-width="1.6"${dash}/>`,
    );
    if (s.markers) {
      for (const p of s.points) {
        out.push(
          `<circle cx="${sx(p.x).toFixed(2)}" cy="${sy(p.y).toFixed(2)}" r="2.8" ` +
            `fill="${s.color}"/>`,
        );
      }
    }
  }

  const legendX = MARGIN.left + plotW + 14;
  series.forEach((s, i) => {
    const y = MARGIN.top + 10 + i * 20;
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    out.push(
      `<line x1="${legendX}" y1="${y}" x2="${legendX + 22}" y2="${y}" ` +
        `stroke="${s.color}" stroke-width="1.6"${dash}/>`,
    );
    out.push(
      `<text x="${legendX + 28}" y="${y}" font-size="11" dominant-baseline="middle" ` +
        `fill="#333333">${esc(s.label)}</text>`,
    );
  });

  out.push(
    `<text x="${WIDTH / 2}" y="24" font-size="14" text-anchor="middle" ` +
      `fill="#111111">${esc(axes.title)}</text>`,
  );
  out.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 14}" font-size="12" ` +
      `text-anchor="middle" fill="#111111">${esc(axes.xLabel)}</text>`,
  );
  out.push(
    `<text x="20" y="${MARGIN.top + plotH / 2}" font-size="12" text-anchor="middle" ` +
      `fill="#111111" transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">` +
      `${esc(axes.yLabel)}</text>`,
  );
  out.push("</svg>");
  return out.join("\n") + "\n";
}
