// Input-to-pose steering: drags, arrow keys, and gamepad axes become pose
// and zoom POSTs, throttled and with at most one request in flight per view.
// The displayed heading/FOV comes exclusively from service acknowledgments,
// never from optimistic local input.

import { Heading, OmniviewClient, ServiceError, ViewSpec, headingFromPose } from "./api.js";

export interface SteeringOptions {
  gainDegPerPixel?: number;
  maxRateHz?: number;
  zoomStepDeg?: number;
  arrowStepDeg?: number;
  minHfovDeg?: number;
  maxHfovDeg?: number;
}

interface PendingState {
  yawDeg: number;
  pitchDeg: number;
  rollDeg: number;
  zoomDeg: number | null;
}

const DEFAULTS: Required<SteeringOptions> = {
  gainDegPerPixel: 0.2,
  maxRateHz: 15,
  zoomStepDeg: 5,
  arrowStepDeg: 5,
  minHfovDeg: 10.5,
  maxHfovDeg: 169.5,
};

export class SteeringController {
  readonly options: Required<SteeringOptions>;
  heading: Heading | null = null;
  hfovDeg: number | null = null;
  lastError: string | null = null;
  onAck: ((spec: ViewSpec) => void) | null = null;

  private pending: PendingState = { yawDeg: 0, pitchDeg: 0, rollDeg: 0, zoomDeg: null };
  private inFlight = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastSendMs = -Infinity;

  constructor(
    private readonly client: OmniviewClient,
    readonly viewId: string,
    options: SteeringOptions = {},
  ) {
    this.options = { ...DEFAULTS, ...options };
  }

  adopt(spec: ViewSpec): void {
    this.heading = headingFromPose(spec.pose);
    this.hfovDeg = spec.hfov_deg ?? null;
  }

  /** Mouse/touch drag in pixels; right and down are positive. */
  dragBy(dxPx: number, dyPx: number): void {
    this.pending.yawDeg += dxPx * this.options.gainDegPerPixel;
    this.pending.pitchDeg += -dyPx * this.options.gainDegPerPixel;
    this.scheduleSend();
  }

  arrowKey(key: "left" | "right" | "up" | "down"): void {
    const step = this.options.arrowStepDeg;
    if (key === "left") this.pending.yawDeg -= step;
    if (key === "right") this.pending.yawDeg += step;
    if (key === "up") this.pending.pitchDeg += step;
    if (key === "down") this.pending.pitchDeg -= step;
    this.scheduleSend();
  }

  /** Wheel ticks; positive (scroll down) widens the view. */
  zoomBy(ticks: number): void {
    const current = this.pending.zoomDeg ?? this.hfovDeg;
    if (current === null) return; // not a perspective view
    const target = current + ticks * this.options.zoomStepDeg;
    this.pending.zoomDeg = Math.min(
      this.options.maxHfovDeg,
      Math.max(this.options.minHfovDeg, target),
    );
    this.scheduleSend();
  }

  /** Gamepad axes in [-1, 1]; called once per animation frame. */
  gamepadAxes(steerX: number, steerY: number, framesPerSecond = 60): void {
    const degPerFrame = (this.options.arrowStepDeg * 6) / framesPerSecond;
    const deadzone = 0.12;
    const x = Math.abs(steerX) > deadzone ? steerX : 0;
    const y = Math.abs(steerY) > deadzone ? steerY : 0;
    if (x === 0 && y === 0) return;
    this.pending.yawDeg += x * degPerFrame;
    this.pending.pitchDeg += -y * degPerFrame;
    this.scheduleSend();
  }

  private hasPending(): boolean {
    return (
      this.pending.yawDeg !== 0 ||
      this.pending.pitchDeg !== 0 ||
      this.pending.rollDeg !== 0 ||
      this.pending.zoomDeg !== null
    );
  }

  private scheduleSend(): void {
    if (this.inFlight || this.timer !== null || !this.hasPending()) return;
    // Whole milliseconds, rounded up: timer floors fractional delays, which
    // would nudge the send rate just above the cap.
    const interval = Math.ceil(1000 / this.options.maxRateHz);
    const wait = Math.max(0, this.lastSendMs + interval - Date.now());
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, wait);
  }

  private async flush(): Promise<void> {
    if (this.inFlight || !this.hasPending()) return;
    const batch = this.pending;
    this.pending = { yawDeg: 0, pitchDeg: 0, rollDeg: 0, zoomDeg: null };
    this.inFlight = true;
    this.lastSendMs = Date.now();
    try {
      let spec: ViewSpec | null = null;
      if (batch.yawDeg !== 0 || batch.pitchDeg !== 0 || batch.rollDeg !== 0) {
        spec = await this.client.postPose(this.viewId, {
          yawDeg: batch.yawDeg,
          pitchDeg: batch.pitchDeg,
          rollDeg: batch.rollDeg,
        });
      }
      if (batch.zoomDeg !== null) {
        spec = await this.client.postZoom(this.viewId, batch.zoomDeg);
      }
      if (spec !== null) {
        this.applyAck(spec);
      }
      this.lastError = null;
    } catch (error) {
      if (error instanceof ServiceError && error.status === 422) {
        this.lastError = error.message; // zoom limit; indicate, keep previous ack
      } else {
        this.lastError = String(error);
      }
    } finally {
      this.inFlight = false;
      this.scheduleSend(); // drain anything accumulated while in flight
    }
  }

  private applyAck(spec: ViewSpec): void {
    this.heading = headingFromPose(spec.pose);
    this.hfovDeg = spec.hfov_deg ?? this.hfovDeg;
    this.onAck?.(spec);
  }
}
