import { defineConfig } from "vite";

// The console is a static SPA; point VITE_API_BASE at the model service
// (defaults to same-origin, which works behind a reverse proxy).
export default defineConfig({
  build: { outDir: "dist", sourcemap: true },
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8000",
    },
  },
});
