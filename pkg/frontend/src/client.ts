import type { SchemaDoc, WhatIfPayload, WhatIfResponse } from "./types.js";

export async function fetchSchema(base = ""): Promise<SchemaDoc> {
  const response = await fetch(`${base}/api/schema`);
  if (!response.ok) {
    throw new Error(`schema request failed with ${response.status}`);
  }
  return (await response.json()) as SchemaDoc;
}

export async function postWhatIf(
  payload: WhatIfPayload,
  base = "",
): Promise<WhatIfResponse> {
  const response = await fetch(`${base}/api/whatif`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(payload),
  });
  if (!response.ok) {
    let detail = `what-if request failed with ${response.status}`;
    try {
      const body = (await response.json()) as { error?: string; message?: string };
      if (body.error) detail = `${body.error}: ${body.message ?? ""}`;
    } catch {
      // non-JSON error body, keep the status line
    }
    throw new Error(detail);
  }
  return (await response.json()) as WhatIfResponse;
}
