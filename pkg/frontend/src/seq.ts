/** Request sequence guard: responses of superseded fetches are discarded. */

export class RequestSequencer {
  private counter = 0;

  next(): number {
    this.counter += 1;
    return this.counter;
  }

  isCurrent(token: number): boolean {
    return token === this.counter;
  }
}
