import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
    // the end-to-end suite trains and boots the real prediction service
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
