#!/usr/bin/env node
// Thin SMT-LIB front end over the z3-solver WASM build, for environments
// without a native z3 binary. Usage: z3.js [-smt2] <file.smt2>
// Prints whatever Z3's SMT-LIB interpreter prints (sat/unsat/unknown,
// models, errors) on stdout, like `z3 -smt2 <file>` would.
"use strict";

const fs = require("fs");

async function main() {
  const args = process.argv.slice(2).filter((a) => a !== "-smt2");
  if (args.length !== 1) {
    console.error("usage: z3.js [-smt2] <file.smt2>");
    process.exit(2);
  }
  const script = fs.readFileSync(args[0], "utf8");
  const { init } = require("z3-solver");
  const { Z3, em } = await init();
  const out = await Z3.eval_smtlib2_string(Z3.mk_context(Z3.mk_config()), script);
  process.stdout.write(out.endsWith("\n") || out === "" ? out : out + "\n");
  // The emscripten runtime keeps worker threads alive; exit explicitly.
  try {
    em.PThread.terminateAllThreads();
  } catch (e) {
    /* best effort */
  }
  process.exit(0);
}

main().catch((err) => {
  console.error(String(err && err.stack ? err.stack : err));
  process.exit(1);
});
