/** Canvas wiring: render loop, orbit controls, click handling and the
 * session toolbar. Entry point for the browser bundle. */

import { AnnotationClient, HttpTransport } from "./client.js";
import { rgbToCss } from "./colors.js";
import { pickPoint } from "./picker.js";
import { defaultView, renderCloud, setActiveObject, ViewState } from "./view.js";

export function mountAnnotator(root: HTMLElement, serverUrl: string): void {
  const canvas = document.createElement("canvas");
  canvas.width = 1280;
  canvas.height = 800;
  const toolbar = document.createElement("div");
  const status = document.createElement("span");
  root.append(toolbar, canvas, status);

  const client = new AnnotationClient(new HttpTransport(serverUrl));
  let view: ViewState = defaultView();

  const draw = () => {
    const ctx = canvas.getContext("2d");
    if (ctx === null || client.state === null) {
      return;
    }
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const rendered = renderCloud(
      client.state.cloud, view, canvas.width, canvas.height,
      client.pendingHighlights,
    );
    rendered.sort((a, b) => b.depth - a.depth);
    for (const p of rendered) {
      ctx.fillStyle = rgbToCss(p.color);
      ctx.fillRect(p.x, p.y, view.pointSizePx, view.pointSizePx);
    }
    const ious = Object.entries(client.state.ious)
      .map(([id, v]) => `#${id}: ${v.toFixed(3)}`)
      .join("  ");
    status.textContent =
      `clicks: ${client.state.nClicks}  active: #${view.activeObjectId}  ${ious}`;
  };

  const button = (label: string, onClick: () => void) => {
    const b = document.createElement("button");
    b.textContent = label;
    b.addEventListener("click", onClick);
    toolbar.append(b);
    return b;
  };

  button("new object", () => {
    view = setActiveObject(view, client.nextObjectId());
    draw();
  });
  button("undo", () => {
    void client.undo().then(draw);
  });
  button("export", () => {
    void client.exportSession().then((result) => {
      status.textContent = `exported ${result.files.length} label files to ${result.dir}`;
    });
  });

  canvas.addEventListener("click", (ev) => {
    if (client.state === null) {
      return;
    }
    const rect = canvas.getBoundingClientRect();
    const rendered = renderCloud(
      client.state.cloud, view, canvas.width, canvas.height);
    const pick = pickPoint(
      rendered, client.state.cloud,
      ev.clientX - rect.left, ev.clientY - rect.top,
    );
    if (pick === null) {
      status.textContent = "no target";
      return;
    }
    draw(); // optimistic highlight
    void client
      .click(pick.pos, view.activeObjectId, pick.pointIndex)
      .then((outcome) => {
        if (!outcome.accepted) {
          status.textContent = "no target (server)";
        }
        draw();
      });
  });

  canvas.addEventListener("wheel", (ev) => {
    view.camera.distance = Math.max(2, view.camera.distance * (ev.deltaY > 0 ? 1.1 : 0.9));
    draw();
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (ev.buttons === 1 && ev.shiftKey) {
      view.camera.yaw += ev.movementX * 0.005;
      view.camera.pitch = Math.min(
        1.5, Math.max(-1.5, view.camera.pitch + ev.movementY * 0.005));
      draw();
    }
  });

  void client.connect({ start: 0 }).then(draw);
}
