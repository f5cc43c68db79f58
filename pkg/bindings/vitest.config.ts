import { defineConfig } from "vitest/config";

// Every binding call spawns the primary toolchain, so individual tests can
// take a few seconds of process startup each.
export default defineConfig({
  test: {
    testTimeout: 60_000,
  },
});
