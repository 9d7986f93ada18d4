/** Entry point: wire the controller to ?session=<id> on the page. */
import { AnnotationApi } from "./api.js";
import { SessionController } from "./controller.js";

function notice(message: string): void {
  const box = document.getElementById("notice");
  if (box) {
    box.textContent = message;
    box.classList.add("visible");
    setTimeout(() => box.classList.remove("visible"), 4000);
  }
}

function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session");
  const queryRoot = document.getElementById("query");
  const dashboardRoot = document.getElementById("dashboard");
  if (!queryRoot || !dashboardRoot) return;
  if (!sessionId) {
    queryRoot.textContent =
      "Open this page as ?session=<id> (create sessions with the CLI or POST /sessions).";
    return;
  }
  const base = params.get("api") ?? "";
  const controller = new SessionController(
    new AnnotationApi(base),
    sessionId,
    queryRoot,
    dashboardRoot,
    { notice },
  );
  controller.start();
}

document.addEventListener("DOMContentLoaded", boot);
