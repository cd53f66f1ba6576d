/**
 * Selection state for one grid screen.
 *
 * Strict-k policy: the (k+1)th selection is refused rather than
 * evicting the oldest pick, so accidental clicks cannot silently
 * rewrite an answer. Submit becomes reachable exactly when k grid
 * positions are selected.
 */

export interface ToggleResult {
  /** false when the click was refused (already at k selections) */
  accepted: boolean;
  selected: readonly number[];
  submittable: boolean;
}

export class SelectionState {
  private readonly k: number;
  private readonly gridSize: number;
  private readonly picks: number[] = [];

  constructor(k: number, gridSize: number) {
    if (!Number.isInteger(k) || k < 1) throw new Error(`invalid k: ${k}`);
    if (!Number.isInteger(gridSize) || gridSize <= k) {
      throw new Error(`grid size ${gridSize} must exceed k=${k}`);
    }
    this.k = k;
    this.gridSize = gridSize;
  }

  get selected(): readonly number[] {
    return [...this.picks];
  }

  get submittable(): boolean {
    return this.picks.length === this.k;
  }

  isSelected(position: number): boolean {
    return this.picks.includes(position);
  }

  /** Toggle membership of a grid position; refuses past k. */
  toggle(position: number): ToggleResult {
    if (!Number.isInteger(position) || position < 0 || position >= this.gridSize) {
      throw new Error(`position ${position} out of range for grid of ${this.gridSize}`);
    }
    const at = this.picks.indexOf(position);
    let accepted = true;
    if (at >= 0) {
      this.picks.splice(at, 1);
    } else if (this.picks.length < this.k) {
      this.picks.push(position);
    } else {
      accepted = false;
    }
    return { accepted, selected: this.selected, submittable: this.submittable };
  }

  clear(): void {
    this.picks.length = 0;
  }
}
