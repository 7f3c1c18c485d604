// Console-local settings. The gateway has no auth layer, so the actor
// string on decisions comes from here.

export type ConsoleSettings = {
  displayName: string;
  gatewayBase: string;
};

export type StorageLike = {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
};

const KEY = "approval-console.settings";

export function loadSettings(storage: StorageLike, defaultBase: string): ConsoleSettings {
  const fallback: ConsoleSettings = { displayName: "", gatewayBase: defaultBase };
  const raw = storage.getItem(KEY);
  if (raw === null) return fallback;
  try {
    const parsed = JSON.parse(raw) as Partial<ConsoleSettings>;
    return {
      displayName: typeof parsed.displayName === "string" ? parsed.displayName : "",
      gatewayBase:
        typeof parsed.gatewayBase === "string" && parsed.gatewayBase !== ""
          ? parsed.gatewayBase
          : defaultBase,
    };
  } catch {
    return fallback;
  }
}

export function saveSettings(storage: StorageLike, settings: ConsoleSettings): void {
  storage.setItem(KEY, JSON.stringify(settings));
}
