import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 240_000,
    hookTimeout: 60_000,
    // the suite drives real child processes of the simulation core;
    // keep file-level parallelism off so timings stay predictable
    fileParallelism: false,
  },
});
