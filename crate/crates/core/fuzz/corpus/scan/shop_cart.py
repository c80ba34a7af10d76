"""Shopping cart arithmetic."""
import math

TAX_RATE = 0.2


def line_total(price, qty):
    subtotal = price * qty
    if qty >= 10:
        subtotal = subtotal * 0.9
    return round(subtotal, 2)


def with_tax(amount):
    taxed = amount * (1 + TAX_RATE)
    return math.floor(taxed * 100) / 100


def wait_for(n):
    ticks = 0
    while ticks >= 0:
        ticks += n
    return ticks
