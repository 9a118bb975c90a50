// Small DOM construction helpers; no framework, no templates.

export interface ElAttrs {
  id?: string;
  className?: string;
  text?: string;
  title?: string;
  type?: string;
  value?: string;
  placeholder?: string;
  htmlFor?: string;
  disabled?: boolean;
  checked?: boolean;
  multiple?: boolean;
  rows?: number;
  dataset?: Record<string, string>;
  onClick?: (ev: MouseEvent) => void;
  onInput?: (ev: Event) => void;
  onChange?: (ev: Event) => void;
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: ElAttrs = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (attrs.id) node.id = attrs.id;
  if (attrs.className) node.className = attrs.className;
  if (attrs.text !== undefined) node.textContent = attrs.text;
  if (attrs.title) node.title = attrs.title;
  if (attrs.type && node instanceof HTMLInputElement) node.type = attrs.type;
  if (attrs.value !== undefined && "value" in node) {
    (node as unknown as { value: string }).value = attrs.value;
  }
  if (attrs.placeholder && "placeholder" in node) {
    (node as unknown as { placeholder: string }).placeholder = attrs.placeholder;
  }
  if (attrs.htmlFor && node instanceof HTMLLabelElement) node.htmlFor = attrs.htmlFor;
  if (attrs.disabled !== undefined && "disabled" in node) {
    (node as unknown as { disabled: boolean }).disabled = attrs.disabled;
  }
  if (attrs.checked !== undefined && node instanceof HTMLInputElement) {
    node.checked = attrs.checked;
  }
  if (attrs.multiple !== undefined && node instanceof HTMLInputElement) {
    node.multiple = attrs.multiple;
  }
  if (attrs.rows !== undefined && node instanceof HTMLTextAreaElement) {
    node.rows = attrs.rows;
  }
  if (attrs.dataset) {
    for (const [key, value] of Object.entries(attrs.dataset)) {
      node.dataset[key] = value;
    }
  }
  if (attrs.onClick) node.addEventListener("click", attrs.onClick as EventListener);
  if (attrs.onInput) node.addEventListener("input", attrs.onInput);
  if (attrs.onChange) node.addEventListener("change", attrs.onChange);
  for (const child of children) {
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) {
    node.removeChild(node.firstChild);
  }
}

export function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node as SVGElement;
}
