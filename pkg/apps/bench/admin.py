from django.contrib import admin

from .models import BenchRun


@admin.register(BenchRun)
class BenchRunAdmin(admin.ModelAdmin):
    list_display = ('scenario', 'censoring_target', 'replicates', 'completed', 'seed', 'created_at')
    list_filter = ('scenario', 'censoring_target', 'created_at')
    search_fields = ('scenario',)
    readonly_fields = ('report', 'created_at')
