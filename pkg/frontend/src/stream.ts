// Live view transports: MJPEG <img> streaming by default, WebSocket binary
// frames as the upgrade path. Both reconnect automatically with backoff so a
// service restart resumes the stream without a page reload.

export interface WsFrame {
  timestampNs: bigint;
  width: number;
  height: number;
  jpeg: Uint8Array;
}

const WS_HEADER_BYTES = 16;

export function parseWsFrame(buffer: ArrayBuffer): WsFrame {
  if (buffer.byteLength < WS_HEADER_BYTES) {
    throw new Error(`frame too short: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  return {
    timestampNs: view.getBigUint64(0, true),
    width: view.getUint32(8, true),
    height: view.getUint32(12, true),
    jpeg: new Uint8Array(buffer, WS_HEADER_BYTES),
  };
}

export class ReconnectPolicy {
  private attempt = 0;

  constructor(private readonly delaysMs: number[] = [500, 1000, 2000, 4000]) {}

  nextDelayMs(): number {
    const delay = this.delaysMs[Math.min(this.attempt, this.delaysMs.length - 1)];
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }
}

export type StreamStatus = "connecting" | "connected" | "retrying" | "closed";

export interface WsLike {
  binaryType: string;
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export interface WsStreamOptions {
  wsFactory?: (url: string) => WsLike;
  policy?: ReconnectPolicy;
  onStatus?: (status: StreamStatus) => void;
}

export class WsViewStream {
  status: StreamStatus = "closed";
  framesReceived = 0;

  private socket: WsLike | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private readonly policy: ReconnectPolicy;
  private readonly wsFactory: (url: string) => WsLike;

  constructor(
    readonly url: string,
    private readonly sink: (frame: WsFrame) => void,
    options: WsStreamOptions = {},
  ) {
    this.policy = options.policy ?? new ReconnectPolicy();
    this.wsFactory = options.wsFactory ?? ((u) => new WebSocket(u) as unknown as WsLike);
    this.onStatus = options.onStatus ?? null;
  }

  private onStatus: ((status: StreamStatus) => void) | null;

  private setStatus(status: StreamStatus): void {
    this.status = status;
    this.onStatus?.(status);
  }

  connect(): void {
    this.stopped = false;
    this.open();
  }

  private open(): void {
    this.setStatus("connecting");
    let socket: WsLike;
    try {
      socket = this.wsFactory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.policy.reset();
      this.setStatus("connected");
    };
    socket.onmessage = (event) => {
      if (event.data instanceof ArrayBuffer) {
        this.framesReceived += 1;
        this.sink(parseWsFrame(event.data));
      }
    };
    socket.onerror = () => {
      // the close handler owns reconnection
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.stopped) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.timer !== null) return;
    this.setStatus("retrying");
    this.timer = setTimeout(() => {
      this.timer = null;
      if (!this.stopped) this.open();
    }, this.policy.nextDelayMs());
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.setStatus("closed");
  }
}

/** MJPEG stream bound to an <img>; reconnects by cache-busting the URL. */
export class MjpegPanel {
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly image: HTMLImageElement,
    private readonly url: string,
    private readonly policy: ReconnectPolicy = new ReconnectPolicy(),
    private readonly onStatus: ((status: StreamStatus) => void) | null = null,
  ) {}

  start(): void {
    this.stopped = false;
    this.image.onerror = () => this.scheduleReload();
    this.image.onload = () => this.policy.reset();
    this.load();
  }

  private load(): void {
    this.onStatus?.("connecting");
    this.image.src = `${this.url}?t=${Date.now()}`;
  }

  private scheduleReload(): void {
    if (this.stopped || this.timer !== null) return;
    this.onStatus?.("retrying");
    this.timer = setTimeout(() => {
      this.timer = null;
      if (!this.stopped) this.load();
    }, this.policy.nextDelayMs());
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.image.removeAttribute("src");
  }
}
