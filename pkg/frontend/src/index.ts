export * from "./protocol.js";
export * from "./colors.js";
export * from "./view.js";
export * from "./session.js";
export * from "./picker.js";
export * from "./client.js";
export { mountAnnotator } from "./main.js";
