/** Tiny string-based SVG/HTML builders; render output stays testable
 * without a DOM. */

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&apos;");
}

export function tag(
  name: string,
  attrs: Record<string, string | number | undefined>,
  children = "",
): string {
  const rendered = Object.entries(attrs)
    .filter(([, value]) => value !== undefined)
    .map(([key, value]) => `${key}="${escapeXml(String(value))}"`)
    .join(" ");
  const open = rendered ? `<${name} ${rendered}>` : `<${name}>`;
  return children ? `${open}${children}</${name}>` : `${open}</${name}>`;
}

export function fmt(value: number, digits = 2): string {
  return value.toFixed(digits);
}
