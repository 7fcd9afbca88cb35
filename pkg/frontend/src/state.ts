/** Console view state and its transitions.
 *
 * The entity selection bar is the only mutation point; every transition
 * returns a fresh state object so views stay pure functions of
 * (state, payloads). The focused pair is always inside the selected set and
 * the threshold slider stays in [0, 1].
 */

export interface ViewState {
  runId: string | null;
  selected: string[];
  minCorr: number;
  useAbsolute: boolean;
  focusedPair: [string, string] | null;
  focusedEntity: string | null;
}

export function initialState(): ViewState {
  return {
    runId: null,
    selected: [],
    minCorr: 0.7,
    useAbsolute: false,
    focusedPair: null,
    focusedEntity: null,
  };
}

function clamp01(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

export function selectRun(state: ViewState, runId: string, allEntities: string[]): ViewState {
  return {
    ...initialState(),
    runId,
    minCorr: state.minCorr,
    useAbsolute: state.useAbsolute,
    selected: [...allEntities],
  };
}

export function setSelection(state: ViewState, entities: string[]): ViewState {
  const selected = [...new Set(entities)];
  const keepPair =
    state.focusedPair !== null &&
    state.focusedPair.every((id) => selected.includes(id));
  return {
    ...state,
    selected,
    focusedPair: keepPair ? state.focusedPair : null,
    focusedEntity:
      state.focusedEntity !== null && selected.includes(state.focusedEntity)
        ? state.focusedEntity
        : null,
  };
}

export function toggleEntity(state: ViewState, entityId: string): ViewState {
  const selected = state.selected.includes(entityId)
    ? state.selected.filter((id) => id !== entityId)
    : [...state.selected, entityId];
  return setSelection(state, selected);
}

export function setThreshold(state: ViewState, value: number): ViewState {
  return { ...state, minCorr: clamp01(value) };
}

export function setAbsolute(state: ViewState, useAbsolute: boolean): ViewState {
  return { ...state, useAbsolute };
}

export function focusPair(state: ViewState, a: string, b: string): ViewState {
  if (!state.selected.includes(a) || !state.selected.includes(b)) {
    return state;
  }
  return { ...state, focusedPair: [a, b] };
}

export function focusEntity(state: ViewState, entityId: string): ViewState {
  if (!state.selected.includes(entityId)) {
    return state;
  }
  return { ...state, focusedEntity: entityId };
}

export function clearFocus(state: ViewState): ViewState {
  return { ...state, focusedPair: null, focusedEntity: null };
}
