import { expect, test } from "vitest";

import { escapeHtml, renderMarkdown } from "../src/markdown.js";

test("escapes HTML-significant characters", () => {
  expect(escapeHtml('<b a="1">&</b>')).toBe("&lt;b a=&quot;1&quot;&gt;&amp;&lt;/b&gt;");
});

test("renders headings at three levels", () => {
  const html = renderMarkdown("# One\n\n## Two\n\n### Three");
  expect(html).toContain("<h1>One</h1>");
  expect(html).toContain("<h2>Two</h2>");
  expect(html).toContain("<h3>Three</h3>");
});

test("joins wrapped lines into one paragraph and splits on blank lines", () => {
  const html = renderMarkdown("first line\nsecond line\n\nnew paragraph");
  expect(html).toBe("<p>first line second line</p>\n<p>new paragraph</p>");
});

test("renders inline emphasis, code, and citation marks", () => {
  const html = renderMarkdown("Uses **bold** and *italic* with `code` [12].");
  expect(html).toContain("<strong>bold</strong>");
  expect(html).toContain("<em>italic</em>");
  expect(html).toContain("<code>code</code>");
  expect(html).toContain('<sup class="cite">[12]</sup>');
});

test("markup inside source text cannot inject elements", () => {
  const html = renderMarkdown("# <script>alert(1)</script>");
  expect(html).not.toContain("<script>");
  expect(html).toContain("&lt;script&gt;");
});
