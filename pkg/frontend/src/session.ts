/** Pure presentation state derived from the server's session view. */

import { SessionView } from "./api.js";

export type ThumbState = "unchosen" | "wrong" | "correct";

export const GRID_COLUMNS = 8;

/** Per-thumbnail state in sample order; green appears only after close. */
export function thumbStates(view: SessionView): ThumbState[] {
  const wrong = new Set(view.wrong);
  return view.sample.map((imageId) => {
    if (wrong.has(imageId)) return "wrong";
    if (view.closed && view.revealed === imageId) return "correct";
    return "unchosen";
  });
}

/** Arrow-key cursor move on the thumbnail grid, clamped to valid cells. */
export function moveCursor(
  index: number,
  key: string,
  count: number,
  columns: number = GRID_COLUMNS,
): number {
  let next: number;
  switch (key) {
    case "ArrowLeft":
      next = index - 1;
      break;
    case "ArrowRight":
      next = index + 1;
      break;
    case "ArrowUp":
      next = index - columns;
      break;
    case "ArrowDown":
      next = index + columns;
      break;
    default:
      return index;
  }
  return next >= 0 && next < count ? next : index;
}
