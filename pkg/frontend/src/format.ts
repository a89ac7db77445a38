// Small pure helpers kept apart from the DOM so they can be unit tested.

import type { MessageSummary } from "./api.js";

export const DEFAULT_POLL_SECONDS = 60;
export const MIN_POLL_SECONDS = 5;

/** Parse a user-entered poll interval; clamp nonsense to sane bounds. */
export function pollMillis(raw: string | null | undefined): number {
  const seconds = Number(raw);
  if (!raw || !Number.isFinite(seconds) || seconds <= 0) {
    return DEFAULT_POLL_SECONDS * 1000;
  }
  return Math.max(MIN_POLL_SECONDS, Math.floor(seconds)) * 1000;
}

/** ISO-8601 from the daemon -> "YYYY-MM-DD HH:MM" in the viewer's zone. */
export function fmtDate(iso: string): string {
  const d = new Date(iso);
  if (Number.isNaN(d.getTime())) {
    return iso;
  }
  const pad = (n: number) => String(n).padStart(2, "0");
  return (
    `${d.getFullYear()}-${pad(d.getMonth() + 1)}-${pad(d.getDate())} ` +
    `${pad(d.getHours())}:${pad(d.getMinutes())}`
  );
}

export function fmtBytes(n: number): string {
  if (n < 1024) return `${n} B`;
  if (n < 1024 * 1024) return `${(n / 1024).toFixed(1)} KiB`;
  return `${(n / (1024 * 1024)).toFixed(1)} MiB`;
}

export function unreadCount(messages: MessageSummary[]): number {
  return messages.filter((m) => m.direction === "received" && !m.read).length;
}

/** Decoded size of a base64 payload without decoding it. */
export function b64Size(b64: string): number {
  const padding = b64.endsWith("==") ? 2 : b64.endsWith("=") ? 1 : 0;
  return Math.max(0, (b64.length * 3) / 4 - padding);
}
