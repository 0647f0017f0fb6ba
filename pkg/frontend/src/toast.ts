/** Auto-dismissing error toasts. */

const DEFAULT_DURATION_MS = 4000;

export function showToast(message: string, durationMs = DEFAULT_DURATION_MS): HTMLElement {
  const host = document.getElementById("toasts") ?? document.body;
  const toast = document.createElement("div");
  toast.className = "toast";
  toast.textContent = message;
  host.appendChild(toast);
  requestAnimationFrame(() => toast.classList.add("toast-visible"));
  setTimeout(() => {
    toast.classList.remove("toast-visible");
    setTimeout(() => toast.remove(), 400);
  }, durationMs);
  return toast;
}

export function dismissToasts(): void {
  const host = document.getElementById("toasts");
  if (host) host.replaceChildren();
}
