// Debouncing plus a request sequence counter. Slider drags collapse into
// one trailing-edge call, and responses that arrive after a newer request
// was issued are discarded (latest wins).

export const PREVIEW_DEBOUNCE_MS = 300;

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number = PREVIEW_DEBOUNCE_MS,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  const wrapped = (...args: A): void => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
  wrapped.cancel = (): void => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
  };
  return wrapped;
}

// One counter per preview stage: issuing a request bumps the sequence, and
// only the response matching the latest number may touch the state.
export class RequestSequencer {
  private seq = 0;

  issue(): number {
    this.seq += 1;
    return this.seq;
  }

  isCurrent(requestNumber: number): boolean {
    return requestNumber === this.seq;
  }
}
