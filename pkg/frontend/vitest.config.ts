import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the e2e spec spawns the Python service and drives real sessions
    testTimeout: 120000,
    hookTimeout: 90000,
  },
});
