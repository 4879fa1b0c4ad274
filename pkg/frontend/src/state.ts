/** Session state: current pair, last click, last response, overlay toggles. */

import type { NormalizedClick } from "./geometry.js";
import type { PredictRequest, PredictResponse } from "./api.js";

export interface OverlayToggles {
  bbox: boolean;
  attention: boolean; // a_s on the satellite image
  locationGate: boolean; // f_u_l next to the query image
}

export interface UploadedPair {
  queryBase64: string;
  satelliteBase64: string;
  queryKind: string;
}

export class SessionState {
  sampleId: string | null = null;
  uploaded: UploadedPair | null = null;
  click: NormalizedClick | null = null;
  response: PredictResponse | null = null;
  sigma: number | null = null; // null -> server default for the modality
  overlays: OverlayToggles = { bbox: true, attention: true, locationGate: false };

  selectSample(sampleId: string): void {
    this.sampleId = sampleId;
    this.uploaded = null;
    this.click = null;
    this.response = null;
  }

  setUpload(pair: UploadedPair): void {
    this.uploaded = pair;
    this.sampleId = null;
    this.click = null;
    this.response = null;
  }

  get hasPair(): boolean {
    return this.sampleId !== null || this.uploaded !== null;
  }

  /** Overlays may render only when a response exists. */
  get canRenderOverlays(): boolean {
    return this.response !== null;
  }

  /** Build the /predict body for the stored click, or null without one. */
  buildRequest(): PredictRequest | null {
    if (this.click === null || !this.hasPair) return null;
    const req: PredictRequest = {
      click: [this.click.x, this.click.y],
      return_attention: this.overlays.attention || this.overlays.locationGate,
    };
    if (this.sampleId !== null) {
      req.sample_id = this.sampleId;
    } else if (this.uploaded !== null) {
      req.query_image = this.uploaded.queryBase64;
      req.satellite_image = this.uploaded.satelliteBase64;
      req.query_kind = this.uploaded.queryKind;
    }
    if (this.sigma !== null) req.sigma = this.sigma;
    return req;
  }
}
