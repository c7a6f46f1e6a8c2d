// WebSocket client: parse incoming frames, queue outgoing commands,
// reconnect with a fixed backoff. Keeps a bounded raw-frame log so a
// session can be replayed through scene.replayScenes for debugging.

import { parseFrame, type ClientCommand, type ServerFrame } from "./protocol.js";

export class FrameLog {
  lines: string[] = [];

  constructor(private cap = 5000) {}

  push(raw: string): void {
    this.lines.push(raw);
    if (this.lines.length > this.cap) {
      this.lines.splice(0, this.lines.length - this.cap);
    }
  }
}

export interface ClientHandlers {
  onFrame(frame: ServerFrame, raw: string): void;
  onStatus(connected: boolean): void;
}

export class Client {
  log = new FrameLog();
  connected = false;
  private ws: WebSocket | null = null;
  private closed = false;

  constructor(private url: string, private handlers: ClientHandlers) {}

  connect(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.connected = true;
      this.handlers.onStatus(true);
    };
    ws.onmessage = (ev: MessageEvent) => {
      let frame: ServerFrame;
      try {
        frame = parseFrame(String(ev.data));
      } catch (err) {
        console.warn("dropping bad frame:", err);
        return;
      }
      this.log.push(String(ev.data));
      this.handlers.onFrame(frame, String(ev.data));
    };
    ws.onclose = () => {
      this.connected = false;
      this.handlers.onStatus(false);
      if (!this.closed) setTimeout(() => this.connect(), 1000);
    };
    ws.onerror = () => ws.close();
  }

  send(cmd: ClientCommand): void {
    if (this.ws !== null && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(cmd));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}

/** ws:// URL for the service that served this page, with a localhost
 * fallback for file:// development. */
export function serviceUrl(loc: { protocol: string; host: string }): string {
  if (!loc.host) return "ws://127.0.0.1:8000/ws";
  const scheme = loc.protocol === "https:" ? "wss:" : "ws:";
  return `${scheme}//${loc.host}/ws`;
}
