import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // end-to-end cases boot the Python service in a subprocess
    testTimeout: 90_000,
    hookTimeout: 90_000,
  },
});
