import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    // Same origin as the live test service, so fetch is not CORS-blocked.
    environmentOptions: { happyDOM: { url: "http://127.0.0.1:8123" } },
    globalSetup: "./tests/globalSetup.ts",
    testTimeout: 120_000,
    hookTimeout: 300_000,
    // The live service is a single shared process; keep test files serial.
    fileParallelism: false,
  },
});
