/** Study controls: every action is exactly one tag addition or one
 * note/exclusion metadata write. The UI never touches objective data.
 */

import { ApiClient } from "./api.js";
import type { RecordDoc } from "./types.js";

export const TAG_UMBRELLA_ACTIVE = "!kadiaigent-al-umbrella-active";
export const TAG_STUDY_STOPPED = "!kadiaigent-al-umbrella-stopped";

export function activateStudy(api: ApiClient, umbrella: RecordDoc) {
  return api.addTag(umbrella.record_id, TAG_UMBRELLA_ACTIVE);
}

export function stopStudy(api: ApiClient, umbrella: RecordDoc) {
  return api.addTag(umbrella.record_id, TAG_STUDY_STOPPED);
}

export function setExcluded(api: ApiClient, trialRecordId: string, excluded: boolean) {
  return api.control(trialRecordId, { excluded });
}

export function addNote(api: ApiClient, recordId: string, note: string) {
  return api.control(recordId, { note });
}

export function isActive(umbrella: RecordDoc): boolean {
  return umbrella.tags.includes(TAG_UMBRELLA_ACTIVE);
}

/** Trial records follow the identifier conventions of the optimizer plugin
 * (suggested trials) and the warm-start loader (prior batches). */
export async function findTrialRecord(
  api: ApiClient,
  umbrellaIdentifier: string,
  batch: number,
): Promise<RecordDoc | null> {
  for (const prefix of ["trial", "prior"]) {
    try {
      return await api.recordByIdentifier(`${umbrellaIdentifier}-${prefix}-${batch}`);
    } catch {
      // try the next naming convention
    }
  }
  return null;
}
