import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

// jsdom rebases `new URL(relative, ...)` onto the fake document origin, so
// fixture paths go through node's path utilities instead.
const HERE = dirname(fileURLToPath(import.meta.url));

export function testPath(relative: string): string {
  return join(HERE, relative);
}

export function readFixture<T>(name: string): T {
  return JSON.parse(readFileSync(testPath(join("fixtures", name)), "utf-8")) as T;
}

/** Install the real page markup (minus scripts) into a jsdom document. */
export function loadAppShell(doc: Document): void {
  const html = readFileSync(testPath("../index.html"), "utf-8");
  const body = /<body>([\s\S]*)<\/body>/.exec(html)![1]!;
  doc.body.innerHTML = body.replace(/<script[\s\S]*?<\/script>/g, "");
}

/** Resolves with the kind of the next matching render announcement. */
export function nextRender(doc: Document, kind?: string): Promise<string> {
  return new Promise((resolve) => {
    const handler = (event: Event) => {
      const got = (event as CustomEvent<{ kind: string }>).detail.kind;
      if (kind !== undefined && got !== kind) return;
      doc.removeEventListener("fixtime:rendered", handler);
      resolve(got);
    };
    doc.addEventListener("fixtime:rendered", handler);
  });
}

export function submitForm(form: HTMLFormElement): void {
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export function setInput(doc: Document, id: string, value: string): void {
  (doc.getElementById(id) as HTMLInputElement | HTMLSelectElement).value = value;
}

export function barValues(container: Element): string[] {
  return Array.from(container.querySelectorAll(".bar-value")).map((n) => n.textContent ?? "");
}
