import { readFileSync } from "node:fs";
import { z } from "zod";

export const KINDS = ["convergence", "cost", "bias_vs_gamma", "bound_overlay"] as const;
export type Kind = (typeof KINDS)[number];

const inputSchema = z.object({
  path: z.string().min(1),
  label: z.string().optional(),
});

const specSchema = z.object({
  kind: z.enum(KINDS),
  inputs: z.array(inputSchema).min(1, "at least one input CSV is required"),
  output: z.string().min(1),
  log_x: z.boolean().default(false),
  log_y: z.boolean().default(true),
  // cost plots only: which cumulative float count drives the x axis
  x: z.enum(["uplink", "downlink", "total"]).default("total"),
});

export type FigureInput = z.infer<typeof inputSchema>;
export type FigureSpec = z.infer<typeof specSchema>;

export function loadSpec(path: string): FigureSpec {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf8"));
  } catch (e) {
    throw new Error(`cannot read figure spec ${path}: ${(e as Error).message}`);
  }
  const parsed = specSchema.safeParse(raw);
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    const where = issue.path.length > 0 ? ` at ${issue.path.join(".")}` : "";
    throw new Error(`invalid figure spec ${path}${where}: ${issue.message}`);
  }
  return parsed.data;
}
