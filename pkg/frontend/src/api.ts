// Typed client for the omniview streaming service HTTP API.

export interface PoseJson {
  parent: string;
  child: string;
  translation: [number, number, number];
  rotation_quaternion_wxyz: [number, number, number, number];
}

export interface ViewSpec {
  view_id: string;
  type: "perspective" | "mercator" | "spherical";
  width: number;
  height: number;
  pose: PoseJson;
  hfov_deg?: number;
  focal_length_m?: number;
  vertical_half_fov_deg?: number;
  cylinder_radius_m?: number;
  fov_deg?: number;
  sphere_radius_m?: number;
}

export interface PoseDelta {
  yawDeg?: number;
  pitchDeg?: number;
  rollDeg?: number;
}

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class OmniviewClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { error?: string };
        if (body.error) detail = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ServiceError(response.status, detail);
    }
    return response.json();
  }

  async listViews(): Promise<ViewSpec[]> {
    const body = (await this.request("/views")) as { views: ViewSpec[] };
    return body.views;
  }

  async getView(viewId: string): Promise<ViewSpec> {
    return (await this.request(`/views/${viewId}`)) as ViewSpec;
  }

  async postPose(viewId: string, delta: PoseDelta): Promise<ViewSpec> {
    return (await this.request(`/views/${viewId}/pose`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        yaw_deg: delta.yawDeg ?? 0,
        pitch_deg: delta.pitchDeg ?? 0,
        roll_deg: delta.rollDeg ?? 0,
      }),
    })) as ViewSpec;
  }

  async postZoom(viewId: string, hfovDeg: number): Promise<ViewSpec> {
    return (await this.request(`/views/${viewId}/zoom`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ hfov_deg: hfovDeg }),
    })) as ViewSpec;
  }

  streamUrl(viewId: string): string {
    return `${this.baseUrl}/views/${viewId}/stream`;
  }

  frameUrl(viewId: string): string {
    return `${this.baseUrl}/views/${viewId}/frame`;
  }

  wsUrl(viewId: string): string {
    return `${this.baseUrl.replace(/^http/, "ws")}/views/${viewId}/ws`;
  }
}

export interface Heading {
  yawDeg: number;
  pitchDeg: number;
}

/** Yaw/pitch of the view axis encoded in an acknowledged pose. */
export function headingFromPose(pose: PoseJson): Heading {
  const [w, x, y, z] = pose.rotation_quaternion_wxyz;
  // forward = R * (0, 0, 1) for a z-forward / y-down camera frame
  const fx = 2 * (x * z + w * y);
  const fy = 2 * (y * z - w * x);
  const fz = 1 - 2 * (x * x + y * y);
  const toDeg = 180 / Math.PI;
  return {
    yawDeg: Math.atan2(fx, fz) * toDeg,
    pitchDeg: Math.atan2(-fy, Math.hypot(fx, fz)) * toDeg,
  };
}
