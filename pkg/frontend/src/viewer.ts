// Viewer shell: one panel per service view, each with its own stream and
// steering state machine so a stalled panel never freezes the others.

import { OmniviewClient, ViewSpec } from "./api.js";
import { SteeringController } from "./steering.js";
import { MjpegPanel, ReconnectPolicy } from "./stream.js";

export class ViewPanel {
  readonly element: HTMLElement;
  readonly steering: SteeringController;
  private readonly stream: MjpegPanel;
  private readonly indicator: HTMLElement;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(client: OmniviewClient, spec: ViewSpec, doc: Document) {
    this.steering = new SteeringController(client, spec.view_id);
    this.steering.adopt(spec);
    this.steering.onAck = () => this.renderIndicator();

    this.element = doc.createElement("section");
    this.element.className = "view-panel";
    const title = doc.createElement("h2");
    title.textContent = spec.view_id;
    this.indicator = doc.createElement("div");
    this.indicator.className = "indicator";
    const image = doc.createElement("img");
    image.className = "stream";
    image.draggable = false;
    this.element.append(title, this.indicator, image);

    this.stream = new MjpegPanel(image, client.streamUrl(spec.view_id), new ReconnectPolicy());
    this.attachInput(image);
    this.renderIndicator();
  }

  start(): void {
    this.stream.start();
  }

  stop(): void {
    this.stream.stop();
  }

  private attachInput(surface: HTMLElement): void {
    surface.addEventListener("pointerdown", (event) => {
      this.dragging = true;
      this.lastX = event.clientX;
      this.lastY = event.clientY;
      surface.setPointerCapture?.(event.pointerId);
    });
    surface.addEventListener("pointermove", (event) => {
      if (!this.dragging) return;
      this.steering.dragBy(event.clientX - this.lastX, event.clientY - this.lastY);
      this.lastX = event.clientX;
      this.lastY = event.clientY;
    });
    surface.addEventListener("pointerup", () => {
      this.dragging = false;
    });
    surface.addEventListener("wheel", (event) => {
      event.preventDefault();
      this.steering.zoomBy(Math.sign(event.deltaY));
    });
  }

  handleArrow(key: string): void {
    const map: Record<string, "left" | "right" | "up" | "down"> = {
      ArrowLeft: "left",
      ArrowRight: "right",
      ArrowUp: "up",
      ArrowDown: "down",
    };
    if (key in map) this.steering.arrowKey(map[key]);
  }

  private renderIndicator(): void {
    const heading = this.steering.heading;
    const fov = this.steering.hfovDeg;
    const parts = [];
    if (heading !== null) {
      parts.push(`yaw ${heading.yawDeg.toFixed(1)} deg`, `pitch ${heading.pitchDeg.toFixed(1)} deg`);
    }
    if (fov !== null) parts.push(`fov ${fov.toFixed(1)} deg`);
    if (this.steering.lastError) parts.push(`(${this.steering.lastError})`);
    this.indicator.textContent = parts.join("  ");
  }
}

export class ViewerApp {
  readonly panels: ViewPanel[] = [];
  private activePanel = 0;
  private readonly retry = new ReconnectPolicy([1000, 2000, 5000]);

  constructor(
    private readonly root: HTMLElement,
    private readonly client: OmniviewClient,
    private readonly doc: Document,
  ) {}

  async connect(): Promise<void> {
    this.root.textContent = "";
    let specs: ViewSpec[];
    try {
      specs = await this.client.listViews();
    } catch (error) {
      this.showBanner(`cannot reach service: ${error}`);
      setTimeout(() => void this.connect(), this.retry.nextDelayMs());
      return;
    }
    this.retry.reset();
    if (specs.length === 0) {
      this.showBanner("service reports no views");
      return;
    }
    for (const spec of specs) {
      const panel = new ViewPanel(this.client, spec, this.doc);
      this.panels.push(panel);
      this.root.append(panel.element);
      panel.start();
    }
    this.doc.addEventListener("keydown", (event) => {
      this.panels[this.activePanel]?.handleArrow(event.key);
    });
    this.pollGamepad();
  }

  private showBanner(message: string): void {
    const banner = this.doc.createElement("div");
    banner.className = "banner";
    banner.textContent = message;
    this.root.append(banner);
  }

  private pollGamepad(): void {
    const nav = (globalThis as { navigator?: Navigator }).navigator;
    if (!nav?.getGamepads) return;
    const poll = () => {
      const pad = nav.getGamepads().find((p) => p !== null);
      if (pad) {
        this.panels[this.activePanel]?.steering.gamepadAxes(
          pad.axes[0] ?? 0,
          pad.axes[1] ?? 0,
        );
      }
      requestAnimationFrame(poll);
    };
    requestAnimationFrame(poll);
  }
}
