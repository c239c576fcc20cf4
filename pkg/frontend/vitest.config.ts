import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    // the acceptance loop builds a fixture dataset and trains real models
    testTimeout: 240_000,
    hookTimeout: 300_000,
  },
});
