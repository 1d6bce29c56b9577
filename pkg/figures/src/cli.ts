import yargs from "yargs";
import { render } from "./render.js";
import { loadSpec } from "./spec.js";

export function main(argv: string[]): number {
  let usageError: string | null = null;
  const args = yargs(argv)
    .scriptName("figures")
    .command("render", "render one figure from a spec file", (y) =>
      y.option("spec", {
        type: "string",
        demandOption: true,
        describe: "path to the figure spec JSON",
      }),
    )
    .demandCommand(1, "expected a command (render)")
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      usageError = msg ?? err?.message ?? "invalid arguments";
    })
    .parseSync();
  if (usageError !== null) {
    console.error(`error: ${usageError}`);
    return 2;
  }
  if (args._[0] !== "render") {
    console.error(`error: unknown command "${args._[0]}"`);
    return 2;
  }

  let spec;
  try {
    spec = loadSpec(args.spec as string);
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 2;
  }
  try {
    render(spec);
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
  console.log(`wrote ${spec.output}`);
  return 0;
}
