import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the roundtrip suite spawns a real gateway and waits on its stream
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
