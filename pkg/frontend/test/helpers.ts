/** Test-side oracles: minimal FITS reading and block-mean downsampling. */

import { readFileSync } from "node:fs";

const BLOCK = 2880;
const CARD = 80;

export interface FitsImage {
  width: number;
  height: number;
  /** unsigned 16-bit samples, row-major */
  data: number[][];
}

export function readFits(path: string): FitsImage {
  const raw = readFileSync(path);
  const header: Record<string, string> = {};
  let pos = 0;
  let ended = false;
  while (!ended) {
    for (let i = 0; i < BLOCK / CARD; i++) {
      const card = raw.subarray(pos + i * CARD, pos + (i + 1) * CARD).toString("latin1");
      const key = card.slice(0, 8).trim();
      if (key === "END") {
        ended = true;
        break;
      }
      if (card[8] === "=") {
        header[key] = card.slice(10).split("/")[0].trim();
      }
    }
    pos += BLOCK;
    if (pos > raw.length) throw new Error("unterminated header");
  }

  const width = Number(header.NAXIS1);
  const height = Number(header.NAXIS2);
  const bzero = Number(header.BZERO ?? 0);
  if (Number(header.BITPIX) !== 16) throw new Error("expected 16-bit data");

  const view = new DataView(raw.buffer, raw.byteOffset + pos);
  const data: number[][] = [];
  let off = 0;
  for (let r = 0; r < height; r++) {
    const row: number[] = new Array(width);
    for (let c = 0; c < width; c++) {
      row[c] = view.getInt16(off, false) + bzero;
      off += 2;
    }
    data.push(row);
  }
  return { width, height, data };
}

/** Block-mean downsample with round-half-up, matching the server preview. */
export function downsample(img: FitsImage, factor: number): number[][] {
  const th = Math.floor(img.height / factor);
  const tw = Math.floor(img.width / factor);
  const out: number[][] = [];
  for (let i = 0; i < th; i++) {
    const row: number[] = new Array(tw);
    for (let j = 0; j < tw; j++) {
      let sum = 0;
      for (let di = 0; di < factor; di++) {
        for (let dj = 0; dj < factor; dj++) {
          sum += img.data[i * factor + di][j * factor + dj];
        }
      }
      row[j] = Math.floor(sum / (factor * factor) + 0.5);
    }
    out.push(row);
  }
  return out;
}
