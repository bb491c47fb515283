/** Pixel-geometry helpers for the SVG views. Layout is the one place the
 * client is allowed to compute numbers of its own; everything here maps
 * API values to screen coordinates without altering them. */

export interface Scale {
  (value: number): number;
  readonly domain: [number, number];
  readonly range: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const scale = ((value: number) => {
    if (span === 0) {
      return (r0 + r1) / 2;
    }
    return r0 + ((value - d0) / span) * (r1 - r0);
  }) as Scale;
  Object.assign(scale, { domain, range });
  return scale;
}

/** Round tick positions covering the domain, at most `count` of them. */
export function ticks(domain: [number, number], count: number): number[] {
  const [lo, hi] = domain;
  if (hi <= lo || count < 1) {
    return [lo];
  }
  const rawStep = (hi - lo) / count;
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10].map((m) => m * power).find((s) => s >= rawStep) ?? rawStep;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.round(v * 1e6) / 1e6);
  }
  return out;
}

const EPSILON = 1e-6;

/**
 * Greedy beeswarm placement along one lane. Points are processed in the
 * order given (callers sort first, which makes the layout deterministic)
 * and each takes the offset of smallest magnitude that avoids overlap
 * with every point already placed. Offsets are clamped to maxOffset, so
 * an overfull lane degrades to overlapping dots rather than escaping it.
 *
 * Returns one vertical offset per input x coordinate.
 */
export function beeswarmOffsets(
  xs: number[],
  radius: number,
  maxOffset: number,
): number[] {
  const diameter = 2 * radius;
  const offsets: number[] = [];
  for (let i = 0; i < xs.length; i++) {
    const x = xs[i];
    const candidates: number[] = [0];
    for (let j = 0; j < i; j++) {
      const dx = Math.abs(x - xs[j]);
      if (dx >= diameter) continue;
      const dy = Math.sqrt(diameter * diameter - dx * dx) + EPSILON;
      candidates.push(offsets[j] + dy, offsets[j] - dy);
    }
    candidates.sort((a, b) => Math.abs(a) - Math.abs(b) || a - b);
    let chosen = candidates[candidates.length - 1];
    for (const y of candidates) {
      if (Math.abs(y) > maxOffset) continue;
      let collides = false;
      for (let j = 0; j < i; j++) {
        const dx = x - xs[j];
        const dy = y - offsets[j];
        if (dx * dx + dy * dy < diameter * diameter - EPSILON) {
          collides = true;
          break;
        }
      }
      if (!collides) {
        chosen = y;
        break;
      }
    }
    offsets.push(Math.max(-maxOffset, Math.min(maxOffset, chosen)));
  }
  return offsets;
}

/** Categorical palette for state colors; cycles past twelve states. */
const STATE_COLORS = [
  "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7",
  "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0", "#2c608c", "#d35400",
];

export function stateColor(state: number): string {
  return STATE_COLORS[((state % STATE_COLORS.length) + STATE_COLORS.length) % STATE_COLORS.length];
}
