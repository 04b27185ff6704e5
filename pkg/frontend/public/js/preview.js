/** Preview image helpers: pixel checksum and min/max display stretch. */
/**
 * Order-dependent checksum over the raw downsampled pixels, used to
 * compare a rendered preview against the recorded file it came from.
 * FNV-1a over the row-major uint16 stream, little 16-bit steps.
 */
export function previewChecksum(img) {
    let h = 0x811c9dc5;
    for (const row of img.data) {
        for (const v of row) {
            h ^= v & 0xff;
            h = Math.imul(h, 0x01000193);
            h ^= (v >> 8) & 0xff;
            h = Math.imul(h, 0x01000193);
        }
    }
    return h >>> 0;
}
export function minMaxStretch(img) {
    let lo = 65535;
    let hi = 0;
    for (const row of img.data) {
        for (const v of row) {
            if (v < lo)
                lo = v;
            if (v > hi)
                hi = v;
        }
    }
    if (hi <= lo)
        hi = lo + 1;
    return { lo, hi };
}
/** Flat grayscale byte array (one byte per pixel) for canvas painting. */
export function toGrayscale(img, stretch) {
    const { lo, hi } = stretch ?? minMaxStretch(img);
    const out = new Uint8ClampedArray(img.width * img.height);
    let i = 0;
    for (const row of img.data) {
        for (const v of row) {
            out[i++] = Math.round(((v - lo) / (hi - lo)) * 255);
        }
    }
    return out;
}
