/** Detailed-information panel: engagement-sorted posts behind an entity. */

import type { EntityDetailOut } from "../types.js";
import { escapeXml, tag } from "./svg.js";

export const EXCERPT_LIMIT = 280;

export interface DetailRender {
  html: string;
  postCount: number;
}

export function renderDetail(payload: EntityDetailOut | null): DetailRender {
  if (payload === null) {
    return {
      html: '<p class="empty">Select an entity to inspect its posts.</p>',
      postCount: 0,
    };
  }
  if (payload.posts.length === 0) {
    return {
      html: `<p class="empty">No posts for ${escapeXml(payload.label)} in this range.</p>`,
      postCount: 0,
    };
  }
  const items = payload.posts
    .map((post) => {
      const truncated =
        post.excerpt.length >= EXCERPT_LIMIT
          ? post.excerpt.slice(0, EXCERPT_LIMIT) + "…"
          : post.excerpt;
      return tag(
        "li",
        { class: "post", "data-post-id": post.post_id },
        tag("span", { class: "engagement" }, String(post.engagement)) +
          tag("span", { class: "timestamp" }, escapeXml(post.timestamp)) +
          tag("span", { class: "excerpt" }, escapeXml(truncated)),
      );
    })
    .join("");
  const html =
    tag("h3", {}, escapeXml(`${payload.label} (${payload.kind})`)) +
    tag("ol", { class: "posts" }, items);
  return { html, postCount: payload.posts.length };
}
