import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { SessionDoc } from "../src/model.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadSessionFixture(name: "depth_session" | "breadth_session"): SessionDoc {
  return JSON.parse(readFileSync(join(here, "fixtures", `${name}.json`), "utf-8")) as SessionDoc;
}
