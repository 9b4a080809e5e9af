/**
 * Meter ballistics: instant attack, 20 dB/s release, 1 s peak hold, and
 * a stale flag once the feed has been quiet for 500 ms so the view can
 * grey a frozen meter.
 */

export const METER_FLOOR_DB = -60;
export const DECAY_DB_PER_S = 20;
export const PEAK_HOLD_MS = 1000;
export const STALE_AFTER_MS = 500;

export function linearToDb(x: number): number {
  if (!(x > 0)) return -Infinity;
  return 20 * Math.log10(x);
}

export function formatDb(db: number): string {
  if (db === -Infinity || db <= METER_FLOOR_DB) return "-inf";
  return db.toFixed(2);
}

export class MeterChannel {
  private displayDbValue = METER_FLOOR_DB;
  private lastDecayAtMs: number | null = null;
  private lastFedAtMs: number | null = null;
  private heldPeakDb = METER_FLOOR_DB;
  private heldAtMs = 0;

  /** Feed one reading (linear peak in [0, 1+]). */
  feed(peakLinear: number, nowMs: number): void {
    const db = Math.max(METER_FLOOR_DB, linearToDb(peakLinear));
    this.decayTo(nowMs);
    if (db > this.displayDbValue) this.displayDbValue = db;
    if (db >= this.heldPeakDb || nowMs - this.heldAtMs > PEAK_HOLD_MS) {
      this.heldPeakDb = db;
      this.heldAtMs = nowMs;
    }
    this.lastFedAtMs = nowMs;
  }

  /** Current bar position in dB, after release decay up to nowMs. */
  displayDb(nowMs: number): number {
    this.decayTo(nowMs);
    return this.displayDbValue;
  }

  /** Peak-hold tick position in dB (falls back to the bar after 1 s). */
  peakHoldDb(nowMs: number): number {
    if (nowMs - this.heldAtMs > PEAK_HOLD_MS) {
      this.heldPeakDb = this.displayDb(nowMs);
      this.heldAtMs = nowMs;
    }
    return this.heldPeakDb;
  }

  /** True once no reading has arrived for 500 ms. */
  isStale(nowMs: number): boolean {
    return (
      this.lastFedAtMs === null || nowMs - this.lastFedAtMs > STALE_AFTER_MS
    );
  }

  private decayTo(nowMs: number): void {
    if (this.lastDecayAtMs !== null) {
      const dt = Math.max(0, nowMs - this.lastDecayAtMs) / 1000;
      this.displayDbValue = Math.max(
        METER_FLOOR_DB,
        this.displayDbValue - DECAY_DB_PER_S * dt,
      );
    }
    this.lastDecayAtMs = nowMs;
  }
}

/** Map a dB value onto [0, 1] for drawing against the meter floor. */
export function dbToFraction(db: number): number {
  if (db === -Infinity) return 0;
  const f = (db - METER_FLOOR_DB) / -METER_FLOOR_DB;
  return Math.min(1, Math.max(0, f));
}
